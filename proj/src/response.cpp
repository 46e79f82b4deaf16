#include "qscat/response.hpp"

#include <cmath>
#include <numbers>

namespace qscat {

namespace {

Complex trace_commutator(const Matrix& obs, const Matrix& t, const Matrix& rho) {
    return ((obs * t - t * obs) * rho).trace();
}

Complex trace_anticommutator(const Matrix& obs, const Matrix& t, const Matrix& rho) {
    return ((obs * t + t * obs) * rho).trace();
}

}  // namespace

Complex chi_delta(const EigenOpTable& eig, const Matrix& rho_S, const Matrix& obs,
                  std::size_t delta_idx, int dir_out, int dir_in, double ep) {
    return -kI * trace_commutator(obs, eig.T(ep, delta_idx, dir_out, dir_in), rho_S);
}

Complex corr_delta(const EigenOpTable& eig, const Matrix& rho_S, const Matrix& obs,
                   std::size_t delta_idx, int dir_out, int dir_in, double ep) {
    return 0.5 * trace_anticommutator(obs, eig.T(ep, delta_idx, dir_out, dir_in), rho_S);
}

Complex chi_aggregate(const EigenOpTable& eig, const Matrix& rho_S, const Matrix& obs,
                      const ParticleEnergyState& rho_P) {
    const Matrix x = assemble_first_order(eig, rho_P);
    return -kI * trace_commutator(obs, x, rho_S);
}

TimeDomainResponse response_time_domain(const EigenOpTable& eig, const Matrix& rho_S,
                                        const Matrix& obs, double ep, int dir_out, int dir_in,
                                        const std::vector<double>& times) {
    const auto& spec = eig.spec();
    const double hbar = spec.hbar;
    const double norm = 1.0 / (2.0 * std::numbers::pi * hbar);
    const auto tensors = eig.eval(ep);
    const auto& deltas = eig.deltas();
    const Matrix script = eig.script_T(ep, dir_out, dir_in);

    TimeDomainResponse out;
    out.from_deltas.reserve(times.size());
    out.from_commutator.reserve(times.size());
    for (double t : times) {
        Complex sum = 0.0;
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const Matrix& td = tensors[(d * 2 + static_cast<std::size_t>(dir_out)) * 2 +
                                       static_cast<std::size_t>(dir_in)];
            sum += std::exp(-kI * Complex(deltas[d] * t / hbar)) *
                   (-kI * trace_commutator(obs, td, rho_S));
        }
        out.from_deltas.push_back(norm * sum);
        const Matrix evolved = heisenberg(spec, script, -t);
        out.from_commutator.push_back(-kI * norm * trace_commutator(obs, evolved, rho_S));
    }
    for (std::size_t k = 0; k < times.size(); ++k)
        out.max_mismatch = std::max(out.max_mismatch,
                                    std::abs(out.from_deltas[k] - out.from_commutator[k]));
    return out;
}

FdrReport fdr_check(const EigenOpTable& eig, const SystemSpec& spec, double beta,
                    const Matrix& obs, double ep) {
    const Matrix omega = thermal_state(spec, beta).matrix();
    const auto tensors = eig.eval(ep);
    const auto& deltas = eig.deltas();
    FdrReport rep;
    for (std::size_t d = 0; d < deltas.size(); ++d) {
        const double th = std::tanh(0.5 * beta * deltas[d]);
        for (int dp = 0; dp < 2; ++dp)
            for (int di = 0; di < 2; ++di) {
                const Matrix& t = tensors[(d * 2 + static_cast<std::size_t>(dp)) * 2 +
                                          static_cast<std::size_t>(di)];
                const Complex chi = -kI * trace_commutator(obs, t, omega);
                const Complex corr = 0.5 * trace_anticommutator(obs, t, omega);
                rep.max_dev = std::max(rep.max_dev, std::abs(chi + 2.0 * kI * th * corr));
                rep.max_dev_split =
                    std::max({rep.max_dev_split,
                              std::abs(chi.imag() + 2.0 * th * corr.real()),
                              std::abs(chi.real() - 2.0 * th * corr.imag())});
            }
    }
    return rep;
}

ContinuousTransforms continuous_transforms(const EigenOpTable& eig, const SystemSpec& spec,
                                           double beta, const Matrix& obs, double ep,
                                           int dir_out, int dir_in,
                                           const std::vector<double>& omega_grid,
                                           double pole_window) {
    const double hbar = spec.hbar;
    const Matrix omega_state = thermal_state(spec, beta).matrix();
    const auto tensors = eig.eval(ep);
    const auto& deltas = eig.deltas();

    ContinuousTransforms out;
    for (std::size_t d = 0; d < deltas.size(); ++d) {
        const Matrix& t = tensors[(d * 2 + static_cast<std::size_t>(dir_out)) * 2 +
                                  static_cast<std::size_t>(dir_in)];
        const Complex chi = -kI * trace_commutator(obs, t, omega_state);
        const Complex corr = 0.5 * trace_anticommutator(obs, t, omega_state);
        out.impulses.positions.push_back(deltas[d]);
        out.impulses.chi.push_back(chi);
        out.impulses.corr.push_back(hbar * corr);
        const double th = std::tanh(0.5 * beta * deltas[d]);
        out.max_fdr_impulse_dev = std::max(
            out.max_fdr_impulse_dev,
            std::abs(chi + (2.0 * kI / hbar) * th * (hbar * corr)));
    }

    const auto pv_sum = [&](double w, double window) {
        Complex acc = 0.0;
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const double gap = hbar * w - deltas[d];
            if (std::abs(gap) <= window) continue;
            acc += out.impulses.chi[d] / gap;
        }
        return acc;
    };

    for (double w : omega_grid) {
        RetardedAdvancedSample s;
        s.omega = w;
        for (double d : deltas)
            if (std::abs(hbar * w - d) <= pole_window) s.flagged = true;
        const Complex s1 = pv_sum(w, pole_window);
        const Complex s2 = pv_sum(w, 2.0 * pole_window);
        const Complex pv = 2.0 * s1 - s2;  // Richardson in the window width
        s.plus = (kI / (2.0 * std::numbers::pi)) * pv;
        s.minus = -(kI / (2.0 * std::numbers::pi)) * pv;
        out.samples.push_back(s);
    }
    return out;
}

ResponseSpectrum build_response_spectrum(const EigenOpTable& eig, const Matrix& rho_S,
                                         const Matrix& obs, const ParticleEnergyState& rho_P,
                                         const std::vector<double>& times,
                                         std::size_t energy_stride) {
    ResponseSpectrum sp;
    const auto& grid = eig.grid();
    const auto& deltas = eig.deltas();
    const std::size_t stride = std::max<std::size_t>(1, energy_stride);
    for (std::size_t i = 0; i < grid.size(); i += stride) {
        const auto tensors = eig.eval(grid.nodes[i]);
        for (std::size_t d = 0; d < deltas.size(); ++d)
            for (int dp = 0; dp < 2; ++dp)
                for (int di = 0; di < 2; ++di) {
                    const Matrix& t =
                        tensors[(d * 2 + static_cast<std::size_t>(dp)) * 2 +
                                static_cast<std::size_t>(di)];
                    ResponseSpectrum::Row row;
                    row.ep = grid.nodes[i];
                    row.delta = deltas[d];
                    row.dir_out = dp;
                    row.dir_in = di;
                    row.chi = -kI * ((obs * t - t * obs) * rho_S).trace();
                    row.corr = 0.5 * ((obs * t + t * obs) * rho_S).trace();
                    sp.rows.push_back(row);
                }
    }
    sp.chi_a = chi_aggregate(eig, rho_S, obs, rho_P);
    sp.times = times;
    const double e_mid = grid.nodes[grid.size() / 2];
    auto td = response_time_domain(eig, rho_S, obs, e_mid, kPlus, kPlus, times);
    sp.chi_time = std::move(td.from_deltas);
    const double hbar = eig.spec().hbar;
    sp.corr_time.reserve(times.size());
    const auto tensors = eig.eval(e_mid);
    for (double t : times) {
        Complex sum = 0.0;
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const Matrix& td_mat = tensors[(d * 2 + kPlus) * 2 + kPlus];
            sum += std::exp(-kI * Complex(deltas[d] * t / hbar)) * 0.5 *
                   ((obs * td_mat + td_mat * obs) * rho_S).trace();
        }
        sp.corr_time.push_back(sum / (2.0 * std::numbers::pi));
    }
    return sp;
}

}  // namespace qscat
