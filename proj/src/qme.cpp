#include "qscat/qme.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace qscat {

namespace {

Vector vec_of(const Matrix& m) {
    const int n = static_cast<int>(m.rows());
    Vector v(n * n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) v(c * n + r) = m(r, c);
    return v;
}

Matrix mat_of(const Vector& v, int n) {
    Matrix m(n, n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) m(r, c) = v(c * n + r);
    return m;
}

// vec(H rho - rho H) = (I (x) H - H^T (x) I) vec(rho)
Matrix commutator_superop(const Matrix& h) {
    const int n = static_cast<int>(h.rows());
    Matrix sop = Matrix::Zero(n * n, n * n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r)
            for (int k = 0; k < n; ++k) {
                sop(c * n + r, c * n + k) += h(r, k);
                sop(c * n + r, k * n + r) -= h(k, c);
            }
    return sop;
}

void free_phases(const SystemSpec& spec, double dt, Vector& v) {
    const int n = spec.dim();
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r)
            v(c * n + r) *= std::exp(
                -kI * Complex((spec.energies[r] - spec.energies[c]) * dt / spec.hbar));
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

void QmeConfig::validate() const {
    if (!(gamma >= 0.0) || !std::isfinite(gamma))
        throw std::invalid_argument("QmeConfig: gamma must be finite and >= 0");
    if (!(t_final > 0.0)) throw std::invalid_argument("QmeConfig: t_final must be > 0");
    for (std::size_t i = 0; i < sample_times.size(); ++i) {
        if (sample_times[i] < 0.0 || sample_times[i] > t_final + 1e-12)
            throw std::invalid_argument("QmeConfig: sample time outside [0, t_final]");
        if (i > 0 && sample_times[i] < sample_times[i - 1])
            throw std::invalid_argument("QmeConfig: sample times must be ascending");
    }
}

QmeTrajectory integrate_qme(const SystemSpec& spec, const CollisionMap& map,
                            const QmeConfig& cfg, const DensityMatrix& rho0) {
    cfg.validate();
    const int n = spec.dim();
    const double hbar = spec.hbar;

    const Matrix h_eff = spec.hamiltonian() + hbar * cfg.gamma * map.lamb_shift().matrix();
    Matrix gen = (-kI / hbar) * commutator_superop(h_eff);
    if (cfg.gamma > 0.0) gen += cfg.gamma * map.dissipator_superoperator();

    double h = cfg.max_step;
    if (!(h > 0.0)) {
        h = 0.01 * hbar / std::max(1e-300, h_eff.norm());
        if (cfg.gamma > 0.0) h = std::min(h, 0.01 / cfg.gamma);
        h = std::min(h, cfg.t_final / 100.0);
    }

    std::vector<double> samples = cfg.sample_times;
    if (samples.empty()) samples = {cfg.t_final};

    QmeTrajectory traj;
    Vector v = vec_of(rho0.matrix());
    double t = 0.0;
    std::size_t total_steps = 0;
    for (double ts : samples) {
        const double dt = ts - t;
        if (dt > 1e-15) {
            const auto steps = static_cast<std::size_t>(std::ceil(dt / h - 1e-12));
            const double hs = dt / static_cast<double>(steps);
            for (std::size_t k = 0; k < steps; ++k) {
                const Vector k1 = gen * v;
                const Vector k2 = gen * (v + 0.5 * hs * k1);
                const Vector k3 = gen * (v + 0.5 * hs * k2);
                const Vector k4 = gen * (v + hs * k3);
                v += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                ++total_steps;
            }
            t = ts;
        }
        Matrix state = mat_of(v, n);
        state = 0.5 * (state + state.adjoint().eval());
        try {
            traj.states.emplace_back(DensityMatrix(state, 1e-8, 1e-5).matrix());
        } catch (const std::invalid_argument& e) {
            throw std::runtime_error("integrate_qme: invalid state at t=" +
                                     std::to_string(ts) + " after " +
                                     std::to_string(total_steps) + " steps: " + e.what());
        }
        traj.times.push_back(ts);
    }
    return traj;
}

McTrajectory monte_carlo_trajectories(const SystemSpec& spec, const CollisionMap& map,
                                      const QmeConfig& cfg, const DensityMatrix& rho0,
                                      bool parallel) {
    cfg.validate();
    const int n = spec.dim();
    const std::size_t n_samples = cfg.sample_times.empty() ? 1 : cfg.sample_times.size();
    std::vector<double> samples = cfg.sample_times;
    if (samples.empty()) samples = {cfg.t_final};
    const std::size_t m = cfg.trajectories;
    if (m == 0) throw std::invalid_argument("monte_carlo_trajectories: no trajectories");

    const Matrix& sop = map.superoperator();
    const Vector v0 = vec_of(rho0.matrix());

    // per-trajectory sample states, filled independently then reduced in
    // trajectory order so the result does not depend on the thread count
    std::vector<Vector> slots(m * n_samples, Vector());

#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::ptrdiff_t ti = 0; ti < static_cast<std::ptrdiff_t>(m); ++ti) {
        std::uint64_t stream = cfg.seed ^ (0x9e3779b97f4a7c15ULL *
                                           (static_cast<std::uint64_t>(ti) + 1));
        const auto next_waiting = [&]() {
            if (cfg.gamma <= 0.0) return std::numeric_limits<double>::infinity();
            const std::uint64_t r = splitmix64(stream);
            const double u = static_cast<double>(r >> 11) * 0x1.0p-53;  // [0, 1)
            return -std::log1p(-u) / cfg.gamma;
        };
        // v is kept at the time of the last collision; samples are read off
        // with a single phase factor, so a collision-free run stays exact
        Vector v = v0;
        Vector scratch(v0.size());
        double t = 0.0;
        double t_next = next_waiting();
        for (std::size_t si = 0; si < samples.size(); ++si) {
            const double ts = samples[si];
            while (t_next <= ts) {
                free_phases(spec, t_next - t, v);
                t = t_next;
                scratch.noalias() = sop * v;
                v.swap(scratch);
                t_next = t + next_waiting();
            }
            scratch = v;
            free_phases(spec, ts - t, scratch);
            slots[static_cast<std::size_t>(ti) * n_samples + si] = scratch;
        }
    }

    McTrajectory out;
    out.times = samples;
    out.mean.assign(n_samples, Matrix::Zero(n, n));
    out.se_real.assign(n_samples, Eigen::MatrixXd::Zero(n, n));
    out.se_imag.assign(n_samples, Eigen::MatrixXd::Zero(n, n));
    for (std::size_t si = 0; si < n_samples; ++si) {
        Vector sum = Vector::Zero(n * n);
        for (std::size_t ti = 0; ti < m; ++ti) sum += slots[ti * n_samples + si];
        const auto md = static_cast<double>(m);
        const Vector mean = sum / md;
        Eigen::VectorXd dev_re2 = Eigen::VectorXd::Zero(n * n);
        Eigen::VectorXd dev_im2 = Eigen::VectorXd::Zero(n * n);
        for (std::size_t ti = 0; ti < m; ++ti) {
            const Vector d = slots[ti * n_samples + si] - mean;
            dev_re2 += d.real().cwiseAbs2();
            dev_im2 += d.imag().cwiseAbs2();
        }
        out.mean[si] = mat_of(mean, n);
        const double denom = md * std::max(1.0, md - 1.0);
        for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) {
                const int k = c * n + r;
                out.se_real[si](r, c) = std::sqrt(dev_re2(k) / denom);
                out.se_imag[si](r, c) = std::sqrt(dev_im2(k) / denom);
            }
    }
    return out;
}

}  // namespace qscat
