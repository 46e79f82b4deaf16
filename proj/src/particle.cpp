#include "qscat/particle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace qscat {

namespace {

constexpr double kNormTol = 1e-6;

}  // namespace

Complex ParticleEnergyState::phi_at(double e, int dir) const {
    if (!grid_.contains(e)) return 0.0;
    return interp_cubic(std::span<const double>(grid_.nodes),
                        std::span<const Complex>(phi_[static_cast<std::size_t>(dir)].data(),
                                                 grid_.size()),
                        e);
}

double ParticleEnergyState::w_at(double e, int dir) const {
    if (!grid_.contains(e)) return 0.0;
    const auto& w = w_[static_cast<std::size_t>(dir)];
    return interp_cubic(std::span<const double>(grid_.nodes),
                        std::span<const double>(w.data(), static_cast<std::size_t>(w.size())),
                        e);
}

Complex ParticleEnergyState::coherence(double e, double e_prime, int dir,
                                       int dir_prime) const {
    if (kind_ == ParticleKind::PureWavepacket)
        return phi_at(e, dir) * std::conj(phi_at(e_prime, dir_prime));
    if (dir != dir_prime || std::abs(e - e_prime) > delta_tol_) return 0.0;
    return w_at(e, dir);
}

double ParticleEnergyState::diagonal(double e, int dir) const {
    if (kind_ == ParticleKind::PureWavepacket) return std::norm(phi_at(e, dir));
    return w_at(e, dir);
}

Complex ParticleEnergyState::amplitude(double e, int dir) const {
    if (kind_ != ParticleKind::PureWavepacket)
        throw std::logic_error("ParticleEnergyState: amplitude only defined for pure states");
    return phi_at(e, dir);
}

double ParticleEnergyState::norm() const {
    double acc = 0.0;
    for (std::size_t i = 0; i < grid_.size(); ++i)
        for (int d = 0; d < 2; ++d) {
            const double val = (kind_ == ParticleKind::PureWavepacket)
                                   ? std::norm(phi_[static_cast<std::size_t>(d)](
                                         static_cast<Eigen::Index>(i)))
                                   : w_[static_cast<std::size_t>(d)](
                                         static_cast<Eigen::Index>(i));
            acc += grid_.weights[i] * val;
        }
    return acc;
}

double ParticleEnergyState::coherence_ratio(double e0, double delta) const {
    const int dir = (kind_ == ParticleKind::PureWavepacket &&
                     phi_[1].size() > 0 && phi_[1].cwiseAbs().maxCoeff() >
                         phi_[0].cwiseAbs().maxCoeff())
                        ? 1
                        : 0;
    const double denom = std::abs(coherence(e0, e0, dir, dir));
    if (denom == 0.0) return 0.0;
    return std::abs(coherence(e0 + 0.5 * delta, e0 - 0.5 * delta, dir, dir)) / denom;
}

ParticleEnergyState ParticleEnergyState::gaussian_wavepacket(
    double mass, double p0, double x0, double sigma_p, const EnergyGrid& grid, double hbar,
    std::array<double, 2> dir_weights) {
    if (!(p0 > 0.0) || !(sigma_p > 0.0) || !(mass > 0.0) || !(hbar > 0.0))
        throw std::invalid_argument("gaussian_wavepacket: p0, sigma_p, mass, hbar must be > 0");
    const double p_lo = std::sqrt(2.0 * mass * grid.lo());
    const double p_hi = std::sqrt(2.0 * mass * grid.hi());
    if (p_lo > p0 - 6.0 * sigma_p + 1e-12 || p_hi < p0 + 6.0 * sigma_p - 1e-12)
        throw std::invalid_argument(
            "gaussian_wavepacket: grid must cover p0 +/- 6 sigma_p in momentum");

    ParticleEnergyState st;
    st.kind_ = ParticleKind::PureWavepacket;
    st.grid_ = grid;
    st.mass_ = mass;
    st.hbar_ = hbar;
    st.gaussian_ = GaussianMeta{p0, x0, sigma_p};
    const double wsum = dir_weights[0] + dir_weights[1];
    if (!(wsum > 0.0)) throw std::invalid_argument("gaussian_wavepacket: zero direction weight");

    const double amp = std::pow(2.0 * std::numbers::pi * sigma_p * sigma_p, -0.25);
    for (int d = 0; d < 2; ++d) {
        Vector phi(static_cast<Eigen::Index>(grid.size()));
        const double w = dir_weights[static_cast<std::size_t>(d)] / wsum;
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double p = std::sqrt(2.0 * mass * grid.nodes[i]);
            const double p_signed = (d == kPlus) ? p : -p;
            const double g = amp * std::exp(-(p_signed - ((d == kPlus) ? p0 : -p0)) *
                                            (p_signed - ((d == kPlus) ? p0 : -p0)) /
                                            (4.0 * sigma_p * sigma_p));
            const Complex phase = std::exp(-kI * Complex(p_signed * x0 / hbar));
            phi(static_cast<Eigen::Index>(i)) =
                std::sqrt(w) * std::sqrt(mass / p) * g * phase;
        }
        st.phi_[static_cast<std::size_t>(d)] = std::move(phi);
    }
    st.delta_tol_ = 1e-12 * grid.hi();

    const double norm = st.norm();
    if (std::abs(norm - 1.0) > kNormTol)
        throw std::invalid_argument("gaussian_wavepacket: grid truncation loses " +
                                    std::to_string(std::abs(norm - 1.0)) + " of the norm");
    return st;
}

ParticleEnergyState ParticleEnergyState::narrow_thermal_ensemble(
    double mass, double beta, const EnergyGrid& grid, std::array<double, 2> dir_weights) {
    if (!(beta > 0.0)) throw std::invalid_argument("narrow_thermal_ensemble: beta must be > 0");
    const double wsum = dir_weights[0] + dir_weights[1];
    if (!(wsum > 0.0))
        throw std::invalid_argument("narrow_thermal_ensemble: zero direction weight");
    std::array<Eigen::VectorXd, 2> w;
    double total = 0.0;
    for (int d = 0; d < 2; ++d) {
        w[static_cast<std::size_t>(d)].resize(static_cast<Eigen::Index>(grid.size()));
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const double val = (dir_weights[static_cast<std::size_t>(d)] / wsum) *
                               std::exp(-beta * (grid.nodes[i] - grid.lo()));
            w[static_cast<std::size_t>(d)](static_cast<Eigen::Index>(i)) = val;
            total += grid.weights[i] * val;
        }
    }
    for (auto& v : w) v /= total;
    auto st = diagonal_ensemble(mass, grid, std::move(w));
    st.beta_ = beta;
    return st;
}

ParticleEnergyState ParticleEnergyState::diagonal_ensemble(
    double mass, const EnergyGrid& grid, std::array<Eigen::VectorXd, 2> weights) {
    for (const auto& v : weights) {
        if (static_cast<std::size_t>(v.size()) != grid.size())
            throw std::invalid_argument("diagonal_ensemble: weight size mismatch");
        if (v.minCoeff() < 0.0)
            throw std::invalid_argument("diagonal_ensemble: negative weight");
    }
    ParticleEnergyState st;
    st.kind_ = ParticleKind::DiagonalEnsemble;
    st.grid_ = grid;
    st.mass_ = mass;
    st.w_ = std::move(weights);
    st.delta_tol_ = 1e-9 * std::max(1.0, std::abs(grid.hi()));
    const double norm = st.norm();
    if (std::abs(norm - 1.0) > kNormTol)
        throw std::invalid_argument("diagonal_ensemble: weights must integrate to 1");
    return st;
}

double ForceProfile::eval(std::size_t term, double t) const {
    if (term >= per_term.size()) throw std::out_of_range("ForceProfile: bad term index");
    for (const auto& w : per_term[term])
        if (t >= w.t_on && t < w.t_off) return w.value;
    return 0.0;
}

std::pair<double, double> ForceProfile::support() const {
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (const auto& term : per_term)
        for (const auto& w : term) {
            lo = any ? std::min(lo, w.t_on) : w.t_on;
            hi = any ? std::max(hi, w.t_off) : w.t_off;
            any = true;
        }
    return {lo, hi};
}

ForceProfile force_profile(const PotentialSpec& pot, double x0, double v0) {
    if (!(v0 > 0.0)) throw std::invalid_argument("force_profile: v0 must be > 0");
    ForceProfile fp;
    fp.x0 = x0;
    fp.v0 = v0;
    fp.per_term.resize(pot.terms.size());
    for (std::size_t l = 0; l < pot.terms.size(); ++l) {
        for (const auto& box : pot.terms[l].profile) {
            // x0 + v0 t in [x_left, x_right)
            fp.per_term[l].push_back(
                {(box.x_left - x0) / v0, (box.x_right - x0) / v0, box.value});
        }
        std::sort(fp.per_term[l].begin(), fp.per_term[l].end(),
                  [](const auto& a, const auto& b) { return a.t_on < b.t_on; });
    }
    return fp;
}

}  // namespace qscat
