#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qscat/qme.hpp"

#include "test_util.hpp"

#include <cmath>

using namespace qscat;
using testutil::BarrierModel;
using testutil::sigma_x;

namespace {

double trace_distance(const Matrix& a, const Matrix& b) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(a - b), Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

Matrix free_evolved(const SystemSpec& spec, const Matrix& rho, double t) {
    Matrix out(rho.rows(), rho.cols());
    for (int r = 0; r < rho.rows(); ++r)
        for (int c = 0; c < rho.cols(); ++c)
            out(r, c) = rho(r, c) * std::exp(-kI * Complex((spec.energies[r] -
                                                            spec.energies[c]) *
                                                           t / spec.hbar));
    return out;
}

struct PacketMap {
    BarrierModel model;
    std::shared_ptr<const EigenOpTable> eig;
    CollisionMap map;
    PacketMap() : model(10.0, 401), eig(model.eigenops(true)),
                  map(CollisionMap::build(eig, model.packet)) {}
};

}  // namespace

TEST_CASE("gamma = 0: free unitary evolution with constant populations") {
    const PacketMap pm;
    std::mt19937_64 rng(3);
    const DensityMatrix rho0(testutil::random_density(2, rng));
    QmeConfig cfg;
    cfg.gamma = 0.0;
    cfg.t_final = 5.0;
    cfg.sample_times = {1.0, 2.5, 5.0};

    const QmeTrajectory det = integrate_qme(pm.model.spec, pm.map, cfg, rho0);
    for (std::size_t k = 0; k < det.times.size(); ++k) {
        const Matrix expected = free_evolved(pm.model.spec, rho0.matrix(), det.times[k]);
        CHECK(max_abs(det.states[k] - expected) < 1e-9);
        for (int j = 0; j < 2; ++j)
            CHECK(std::abs(det.states[k](j, j) - rho0.matrix()(j, j)) < 1e-9);
    }

    cfg.trajectories = 8;
    cfg.seed = 99;
    const McTrajectory mc = monte_carlo_trajectories(pm.model.spec, pm.map, cfg, rho0);
    for (std::size_t k = 0; k < mc.times.size(); ++k) {
        const Matrix expected = free_evolved(pm.model.spec, rho0.matrix(), mc.times[k]);
        CHECK(max_abs(mc.mean[k] - expected) < 1e-14);  // exact phases, no sampling noise
        CHECK(mc.se_real[k].maxCoeff() < 1e-14);
    }
}

TEST_CASE("trace is preserved along the integration") {
    const PacketMap pm;
    QmeConfig cfg;
    cfg.gamma = 0.7;
    cfg.t_final = 8.0;
    for (int i = 1; i <= 8; ++i) cfg.sample_times.push_back(static_cast<double>(i));
    const DensityMatrix rho0 = thermal_state(pm.model.spec, 0.3);
    const QmeTrajectory det = integrate_qme(pm.model.spec, pm.map, cfg, rho0);
    for (const auto& st : det.states)
        CHECK(std::abs(st.trace().real() - 1.0) < 1e-8);
}

TEST_CASE("short-time linearity against the generator") {
    const PacketMap pm;
    const SystemSpec& spec = pm.model.spec;
    std::mt19937_64 rng(5);
    const Matrix rho0 = testutil::random_density(2, rng);
    const double gamma = 0.5;

    const Matrix h_eff = spec.hamiltonian() + spec.hbar * gamma * pm.map.lamb_shift().matrix();
    const auto generator = [&](const Matrix& r) {
        return Matrix((-kI / spec.hbar) * (h_eff * r - r * h_eff) +
                      gamma * pm.map.dissipator(r));
    };

    double prev = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double dt = 0.01 / (1 << k);
        QmeConfig cfg;
        cfg.gamma = gamma;
        cfg.t_final = dt;
        cfg.sample_times = {dt};
        cfg.max_step = dt / 8.0;
        const QmeTrajectory traj =
            integrate_qme(spec, pm.map, cfg, DensityMatrix(rho0));
        const double err = max_abs(traj.states[0] - rho0 - dt * generator(rho0));
        if (k > 0) CHECK(err < 0.3 * prev);  // second-order remainder
        prev = err;
    }
}

TEST_CASE("monte carlo agrees with deterministic integration within 3 sigma") {
    const PacketMap pm;
    QmeConfig cfg;
    cfg.gamma = 0.5;
    cfg.t_final = 10.0;
    cfg.sample_times = {2.0, 5.0, 10.0};
    cfg.trajectories = 4000;
    cfg.seed = 20240817;
    const DensityMatrix rho0 = thermal_state(pm.model.spec, 3.0);

    const QmeTrajectory det = integrate_qme(pm.model.spec, pm.map, cfg, rho0);
    const McTrajectory mc = monte_carlo_trajectories(pm.model.spec, pm.map, cfg, rho0);

    for (std::size_t k = 0; k < mc.times.size(); ++k)
        for (int r = 0; r < 2; ++r)
            for (int c = 0; c < 2; ++c) {
                const double floor = 1e-12;
                CHECK(std::abs(mc.mean[k](r, c).real() - det.states[k](r, c).real()) <=
                      3.0 * std::max(floor, mc.se_real[k](r, c)));
                CHECK(std::abs(mc.mean[k](r, c).imag() - det.states[k](r, c).imag()) <=
                      3.0 * std::max(floor, mc.se_imag[k](r, c)));
            }

    // doubling the trajectory count shrinks the standard error like 1/sqrt(2)
    QmeConfig cfg2 = cfg;
    cfg2.trajectories = 8000;
    const McTrajectory mc2 = monte_carlo_trajectories(pm.model.spec, pm.map, cfg2, rho0);
    const double se1 = mc.se_real.back().maxCoeff();
    const double se2 = mc2.se_real.back().maxCoeff();
    CHECK(se2 / se1 == doctest::Approx(1.0 / std::sqrt(2.0)).epsilon(0.2));
}

TEST_CASE("repeated thermal collisions relax to the gibbs state") {
    const SystemSpec spec = two_level(1.0);
    const PotentialSpec pot = barrier_potential(1.0, sigma_x(), 1.0, -0.5, 0.5);
    EnergyGrid grid = EnergyGrid::momentum_uniform(1.0, 1e-4, std::sqrt(80.0), 1501);
    for (auto& e : grid.nodes)
        if (std::abs(e - 1.0) < 1e-7) e += 3e-7;
    grid = EnergyGrid::from_nodes(std::move(grid.nodes));
    const auto ens = ParticleEnergyState::narrow_thermal_ensemble(1.0, 1.0, grid);
    const auto eig = std::make_shared<EigenOpTable>(
        EigenOpTable::build(spec, grid, std::make_shared<ExactAmplitudes>(spec, pot)));
    const CollisionMap map = CollisionMap::build(eig, ens);

    QmeConfig cfg;
    cfg.gamma = 1.0;
    cfg.t_final = 1500.0;
    cfg.sample_times = {500.0, 1500.0};
    cfg.max_step = 0.01;
    Matrix excited = Matrix::Zero(2, 2);
    excited(1, 1) = 1.0;
    const QmeTrajectory traj = integrate_qme(spec, map, cfg, DensityMatrix(excited));
    const Matrix omega = thermal_state(spec, 1.0).matrix();
    CHECK(trace_distance(traj.states.back(), omega) < 1e-3);
    CHECK(trace_distance(traj.states.back(), omega) <
          trace_distance(traj.states.front(), omega) + 1e-12);
}

TEST_CASE("qme config validation") {
    QmeConfig bad;
    bad.gamma = -1.0;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    QmeConfig bad2;
    bad2.t_final = 1.0;
    bad2.sample_times = {0.5, 2.0};
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}
