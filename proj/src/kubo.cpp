#include "qscat/kubo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qscat {

namespace {

// int_{u1}^{u2} e^{i delta u / hbar} du, stable for small delta
Complex boxcar_moment(double delta, double hbar, double u1, double u2) {
    if (delta == 0.0) return u2 - u1;
    const double len = u2 - u1;
    const double mid = 0.5 * (u1 + u2);
    return (2.0 * hbar / delta) * std::sin(0.5 * delta * len / hbar) *
           std::exp(kI * Complex(delta * mid / hbar));
}

}  // namespace

BornSpectrum born_response_spectrum(const SystemSpec& spec, const PotentialSpec& pot,
                                    const Matrix& rho_S, const Matrix& obs) {
    spec.validate();
    pot.validate(spec.dim());
    BornSpectrum out;
    for (const auto& term : pot.terms) {
        const BohrDecomposition dec = bohr_decompose(spec, term.system_op);
        std::vector<std::pair<double, Complex>> entries;
        for (const auto& bt : dec.terms) {
            const Complex chi =
                -kI * ((obs * bt.op - bt.op * obs) * rho_S).trace();
            entries.emplace_back(bt.delta, chi);
        }
        out.per_term.push_back(std::move(entries));
    }
    return out;
}

KuboResult kubo_convolution(const KuboConfig& cfg) {
    cfg.spec.validate();
    cfg.pot.validate(cfg.spec.dim());
    const double hbar = cfg.spec.hbar;
    const BornSpectrum spectrum =
        born_response_spectrum(cfg.spec, cfg.pot, cfg.rho_S, cfg.obs);
    const ForceProfile fp = force_profile(cfg.pot, cfg.x0, cfg.v0);
    if (cfg.horizon > 0.0) {
        const auto [lo, hi] = fp.support();
        if (lo < -cfg.horizon || hi > cfg.horizon)
            throw std::invalid_argument("kubo_convolution: force support exceeds horizon");
    }

    // chi_A = sum_l int chi^l_A(-u) f^l(u) du with chi^l_A(-u) =
    // (1/hbar) sum_Delta e^{i Delta u / hbar} chi^l_Delta; the causal form
    // keeps only u <= 0 (force entirely in the past of the measurement).
    Complex half = 0.0, full = 0.0;
    for (std::size_t l = 0; l < fp.per_term.size(); ++l) {
        for (const auto& win : fp.per_term[l]) {
            for (const auto& [delta, chi] : spectrum.per_term[l]) {
                const Complex coeff = chi * win.value / hbar;
                full += coeff * boxcar_moment(delta, hbar, win.t_on, win.t_off);
                const double u2 = std::min(win.t_off, 0.0);
                if (win.t_on < u2)
                    half += coeff * boxcar_moment(delta, hbar, win.t_on, u2);
            }
        }
    }
    KuboResult res;
    res.value = half.real();
    res.full_line = full.real();
    res.imag_residue = std::max(std::abs(half.imag()), std::abs(full.imag()));
    return res;
}

DrivenResult driven_unitary_oracle(const KuboConfig& cfg, double rtol, double atol) {
    cfg.spec.validate();
    cfg.pot.validate(cfg.spec.dim());
    const double hbar = cfg.spec.hbar;
    const ForceProfile fp = force_profile(cfg.pot, cfg.x0, cfg.v0);
    auto [t_lo, t_hi] = fp.support();
    if (t_lo == 0.0 && t_hi == 0.0 && fp.per_term.empty()) t_hi = 1.0;
    if (cfg.horizon > 0.0 && (t_lo < -cfg.horizon || t_hi > cfg.horizon))
        throw std::invalid_argument("driven_unitary_oracle: force support exceeds horizon");
    const double margin = 1e-3 * std::max(1.0, t_hi - t_lo);
    const double t_begin = t_lo - margin;
    const double t_end = std::max(0.0, t_hi) + margin;

    const Matrix h0 = cfg.spec.hamiltonian();
    const auto hamiltonian = [&](double t) {
        Matrix h = h0;
        for (std::size_t l = 0; l < fp.per_term.size(); ++l) {
            const double f = fp.eval(l, t);
            if (f != 0.0) h += f * cfg.pot.terms[l].system_op;
        }
        return h;
    };
    const auto rhs = [&](double t, const Matrix& rho) {
        const Matrix h = hamiltonian(t);
        return Matrix((-kI / hbar) * (h * rho - rho * h));
    };

    // force discontinuities split the integration range
    std::vector<double> cuts{t_begin, t_end};
    for (const auto& term : fp.per_term)
        for (const auto& w : term) {
            if (w.t_on > t_begin && w.t_on < t_end) cuts.push_back(w.t_on);
            if (w.t_off > t_begin && w.t_off < t_end) cuts.push_back(w.t_off);
        }
    if (0.0 > t_begin && 0.0 < t_end) cuts.push_back(0.0);
    std::sort(cuts.begin(), cuts.end());
    cuts.erase(std::unique(cuts.begin(), cuts.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-15; }),
               cuts.end());

    // Cash-Karp embedded 4(5) pair
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 3.0 / 10, a42 = -9.0 / 10, a43 = 6.0 / 5;
    static constexpr double a51 = -11.0 / 54, a52 = 5.0 / 2, a53 = -70.0 / 27,
                            a54 = 35.0 / 27;
    static constexpr double a61 = 1631.0 / 55296, a62 = 175.0 / 512, a63 = 575.0 / 13824,
                            a64 = 44275.0 / 110592, a65 = 253.0 / 4096;
    static constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 3.0 / 5, c5 = 1.0,
                            c6 = 7.0 / 8;
    static constexpr double b1 = 37.0 / 378, b3 = 250.0 / 621, b4 = 125.0 / 594,
                            b6 = 512.0 / 1771;
    static constexpr double d1 = 2825.0 / 27648, d3 = 18575.0 / 48384, d4 = 13525.0 / 55296,
                            d5 = 277.0 / 14336, d6 = 1.0 / 4;

    Matrix rho = cfg.rho_S;
    const double a0 = (cfg.obs * rho).trace().real();
    DrivenResult res;
    res.times.push_back(t_begin);
    res.delta_a.push_back(0.0);

    for (std::size_t seg = 0; seg + 1 < cuts.size(); ++seg) {
        double t = cuts[seg];
        const double t_stop = cuts[seg + 1];
        double h = (cfg.step > 0.0) ? cfg.step : (t_stop - t);
        h = std::min(h, t_stop - t);
        while (t < t_stop - 1e-15) {
            h = std::min(h, t_stop - t);
            const Matrix k1 = rhs(t, rho);
            const Matrix k2 = rhs(t + c2 * h, Matrix(rho + h * a21 * k1));
            const Matrix k3 = rhs(t + c3 * h, Matrix(rho + h * (a31 * k1 + a32 * k2)));
            const Matrix k4 =
                rhs(t + c4 * h, Matrix(rho + h * (a41 * k1 + a42 * k2 + a43 * k3)));
            const Matrix k5 = rhs(
                t + c5 * h, Matrix(rho + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4)));
            const Matrix k6 =
                rhs(t + c6 * h, Matrix(rho + h * (a61 * k1 + a62 * k2 + a63 * k3 +
                                                  a64 * k4 + a65 * k5)));
            const Matrix y5 = rho + h * (b1 * k1 + b3 * k3 + b4 * k4 + b6 * k6);
            const Matrix y4 =
                rho + h * (d1 * k1 + d3 * k3 + d4 * k4 + d5 * k5 + d6 * k6);
            const double scale = atol + rtol * std::max(1.0, max_abs(rho));
            const double err = max_abs(y5 - y4) / scale;
            if (err <= 1.0) {
                t += h;
                rho = y5;
                ++res.steps;
                res.times.push_back(t);
                res.delta_a.push_back((cfg.obs * rho).trace().real() - a0);
            }
            const double grow = (err > 0.0) ? 0.9 * std::pow(err, -0.2) : 5.0;
            h *= std::clamp(grow, 0.1, 5.0);
            if (!(h > 1e-18)) throw std::runtime_error("driven_unitary_oracle: step underflow");
        }
    }

    res.trace_err = std::abs(rho.trace() - Complex(1.0));
    res.herm_err = max_abs(rho - rho.adjoint().eval());
    // delta A at the time origin (exact free evolution does not change Tr[A rho]
    // for stationary rho only; we sample the stored trajectory instead)
    double best = std::abs(res.times.front() - 0.0);
    res.value_at_zero = res.delta_a.front();
    for (std::size_t i = 0; i < res.times.size(); ++i) {
        if (std::abs(res.times[i]) <= best) {
            best = std::abs(res.times[i]);
            res.value_at_zero = res.delta_a[i];
        }
    }
    return res;
}

Complex born_chi_quantum_force(const KuboConfig& cfg, double mass, double p0, double sigma_p,
                               std::size_t time_nodes) {
    cfg.spec.validate();
    cfg.pot.validate(cfg.spec.dim());
    const double hbar = cfg.spec.hbar;
    const BornSpectrum spectrum =
        born_response_spectrum(cfg.spec, cfg.pot, cfg.rho_S, cfg.obs);

    const double v0 = p0 / mass;
    const double sigma_x0 = 0.5 * hbar / sigma_p;
    const auto sigma_x = [&](double t) {
        const double s = sigma_p * t / mass;
        return std::sqrt(sigma_x0 * sigma_x0 + s * s);
    };
    const auto cdf = [](double z) { return 0.5 * std::erfc(-z / std::numbers::sqrt2); };
    const auto force = [&](std::size_t l, double t) {
        const double mu = cfg.x0 + v0 * t;
        const double s = sigma_x(t);
        double f = 0.0;
        for (const auto& box : cfg.pot.terms[l].profile)
            f += box.value * (cdf((box.x_right - mu) / s) - cdf((box.x_left - mu) / s));
        return f;
    };

    // time window where the packet overlaps any box (10 sigma margin, two passes
    // to account for spreading)
    double x_lo = cfg.pot.x_min(), x_hi = cfg.pot.x_max();
    double t_lo = (x_lo - cfg.x0) / v0, t_hi = (x_hi - cfg.x0) / v0;
    for (int pass = 0; pass < 2; ++pass) {
        const double smax = std::max(sigma_x(t_lo), sigma_x(t_hi));
        t_lo = (x_lo - 10.0 * smax - cfg.x0) / v0;
        t_hi = (x_hi + 10.0 * smax - cfg.x0) / v0;
    }

    std::size_t n = time_nodes | 1;  // Simpson needs an odd count
    const double h = (t_hi - t_lo) / static_cast<double>(n - 1);
    Complex acc = 0.0;
    for (std::size_t l = 0; l < cfg.pot.terms.size(); ++l) {
        Complex sum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = t_lo + h * static_cast<double>(i);
            const double f = force(l, t);
            Complex chi_at = 0.0;  // chi^l_A(-t) = (1/hbar) sum e^{i Delta t/hbar} chi_Delta
            for (const auto& [delta, chi] : spectrum.per_term[l])
                chi_at += chi * std::exp(kI * Complex(delta * t / hbar));
            const double w = (i == 0 || i + 1 == n) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
            sum += w * chi_at * f;
        }
        acc += sum * h / (3.0 * hbar);
    }
    return acc;
}

ClassicalLrtReport classical_lrt_suite(const SystemSpec& spec, const Matrix& obs,
                                       const Matrix& drive, double beta,
                                       const std::vector<double>& omega_grid) {
    spec.validate();
    const double hbar = spec.hbar;
    const Matrix omega_state = thermal_state(spec, beta).matrix();
    const BohrDecomposition dec = bohr_decompose(spec, drive);

    // phi_Delta so that phi_AV(t) = sum_Delta phi_Delta e^{-i Delta t/hbar}
    std::vector<double> deltas;
    std::vector<Complex> phi_d;
    for (const auto& term : dec.terms) {
        deltas.push_back(term.delta);
        phi_d.push_back((-kI / hbar) *
                        ((obs * term.op - term.op * obs) * omega_state).trace());
    }

    ClassicalLrtReport rep;

    // two routes for the response function on a time grid
    double gap = 0.0;
    for (double d : deltas) gap = std::max(gap, std::abs(d));
    const double t_max = (gap > 0.0) ? 10.0 * std::numbers::pi * hbar / gap : 10.0;
    for (int i = 0; i <= 100; ++i) {
        const double t = t_max * static_cast<double>(i) / 100.0;
        Complex from_sum = 0.0;
        for (std::size_t k = 0; k < deltas.size(); ++k)
            from_sum += phi_d[k] * std::exp(-kI * Complex(deltas[k] * t / hbar));
        const Matrix a_t = heisenberg(spec, obs, t);
        const Complex direct =
            (-kI / hbar) * ((a_t * drive - drive * a_t) * omega_state).trace();
        rep.max_phi_mismatch = std::max(rep.max_phi_mismatch, std::abs(from_sum - direct));
    }

    // susceptibility by damped half-line transform, Richardson in the damping
    const double eps0 = (gap > 0.0) ? 1e-5 * gap / hbar : 1e-5;
    const auto chi_damped = [&](double w, double eps) {
        Complex acc = 0.0;
        for (std::size_t k = 0; k < deltas.size(); ++k)
            acc += phi_d[k] / Complex(eps, deltas[k] / hbar - w);
        return acc;
    };
    for (double w : omega_grid)
        rep.chi_omega.push_back(2.0 * chi_damped(w, eps0) - chi_damped(w, 2.0 * eps0));

    // classical FDR at the impulse frequencies with matched damping; the
    // difference is linear in the damping, so extrapolate it away
    for (std::size_t k = 0; k < deltas.size(); ++k) {
        const double w = deltas[k] / hbar;
        rep.impulse_omegas.push_back(w);
        const double th = std::tanh(0.5 * beta * hbar * w);
        const auto corr_damped = [&](double eps) {
            double acc = 0.0;
            for (std::size_t q = 0; q < deltas.size(); ++q) {
                const Complex c =
                    0.5 * ((obs * dec.terms[q].op + dec.terms[q].op * obs) * omega_state)
                              .trace();
                const double x = deltas[q] / hbar - w;
                acc += (c * (2.0 * eps) / (eps * eps + x * x)).real();
            }
            return acc;
        };
        const auto dev = [&](double eps) {
            return chi_damped(w, eps).imag() + (1.0 / hbar) * th * corr_damped(eps);
        };
        const double e1 = (gap > 0.0) ? 1e-3 * gap / hbar : 1e-3;
        const double extrapolated = 2.0 * dev(0.5 * e1) - dev(e1);
        rep.max_a12_dev = std::max(rep.max_a12_dev, std::abs(extrapolated));
        rep.max_im_chi =
            std::max(rep.max_im_chi, std::abs(chi_damped(w, e1).imag() * e1));
    }
    return rep;
}

}  // namespace qscat
