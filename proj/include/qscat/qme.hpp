// qme.hpp — Poisson repeated-collision dynamics: deterministic RK4
// integration of the master equation built from the collision map, and a
// Monte Carlo trajectory sampler with per-trajectory derived seeds used as an
// independent oracle.

#pragma once

#include "qscat/collision.hpp"
#include "qscat/operators.hpp"

#include <cstdint>
#include <vector>

namespace qscat {

struct QmeConfig {
    double gamma = 0.0;   // collision rate
    double t_final = 1.0;
    std::vector<double> sample_times;  // ascending, within [0, t_final]
    double max_step = 0.0;             // 0 -> automatic choice
    std::size_t trajectories = 1000;
    std::uint64_t seed = 0;

    void validate() const;
};

struct QmeTrajectory {
    std::vector<double> times;
    std::vector<Matrix> states;
};

// d rho/dt = -(i/hbar)[H_S + hbar gamma H_LS, rho] + gamma D(rho), fixed-step
// classical RK4; every sample is validated (positivity beyond -1e-5 aborts).
QmeTrajectory integrate_qme(const SystemSpec& spec, const CollisionMap& map,
                            const QmeConfig& cfg, const DensityMatrix& rho0);

struct McTrajectory {
    std::vector<double> times;
    std::vector<Matrix> mean;
    // standard errors of the mean, per entry, for real and imaginary parts
    std::vector<Eigen::MatrixXd> se_real;
    std::vector<Eigen::MatrixXd> se_imag;
};

// Poisson collision times at rate gamma; free evolution between collisions,
// the collision map at each event. Deterministic for a fixed seed and
// trajectory count regardless of thread count.
McTrajectory monte_carlo_trajectories(const SystemSpec& spec, const CollisionMap& map,
                                      const QmeConfig& cfg, const DensityMatrix& rho0,
                                      bool parallel = true);

// splitmix64 stream; used to derive independent per-trajectory generators.
std::uint64_t splitmix64(std::uint64_t& state);

}  // namespace qscat
