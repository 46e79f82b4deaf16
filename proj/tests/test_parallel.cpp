#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qscat/qme.hpp"

#include "test_util.hpp"

using namespace qscat;
using testutil::BarrierModel;

// The OpenMP kernels fill independent per-item slots and reduce in a fixed
// order, so the parallel paths must agree with the serial references bitwise.

TEST_CASE("amplitude table: parallel build equals serial build") {
    const BarrierModel model(10.0, 101);
    const SMatrixTable par =
        SMatrixTable::build(model.spec, model.pot, 4880.0, 5120.0, 401, true);
    const SMatrixTable ser =
        SMatrixTable::build(model.spec, model.pot, 4880.0, 5120.0, 401, false);
    for (double e : {4890.1, 5000.5, 5111.9})
        CHECK(max_abs(par.t_full(e) - ser.t_full(e)) == 0.0);
}

TEST_CASE("eigenoperator table and map assembly: parallel equals serial") {
    const BarrierModel model(10.0, 401);
    const auto src = std::make_shared<ExactAmplitudes>(model.spec, model.pot);
    const auto eig_par = std::make_shared<EigenOpTable>(
        EigenOpTable::build(model.spec, model.grid, src, true));
    const auto eig_ser = std::make_shared<EigenOpTable>(
        EigenOpTable::build(model.spec, model.grid, src, false));
    for (std::size_t i = 0; i < model.grid.size(); i += 37)
        for (std::size_t d = 0; d < 3; ++d)
            CHECK(max_abs(eig_par->at_node(i, d, kPlus, kMinus) -
                          eig_ser->at_node(i, d, kPlus, kMinus)) == 0.0);

    const CollisionMap map_par = CollisionMap::build(eig_par, model.packet, true);
    const CollisionMap map_ser = CollisionMap::build(eig_par, model.packet, false);
    CHECK(max_abs(map_par.lamb_shift().matrix() - map_ser.lamb_shift().matrix()) == 0.0);

    std::mt19937_64 rng(3);
    const Matrix rho = testutil::random_density(2, rng);
    CHECK(max_abs(map_par.dissipator(rho, true) - map_par.dissipator(rho, false)) == 0.0);
}

TEST_CASE("monte carlo: trajectory reduction is thread-count independent") {
    const BarrierModel model(10.0, 201);
    const CollisionMap map = CollisionMap::build(model.eigenops(true), model.packet);
    QmeConfig cfg;
    cfg.gamma = 0.8;
    cfg.t_final = 5.0;
    cfg.sample_times = {1.0, 5.0};
    cfg.trajectories = 500;
    cfg.seed = 31;
    const DensityMatrix rho0 = thermal_state(model.spec, 1.0);
    const McTrajectory par = monte_carlo_trajectories(model.spec, map, cfg, rho0, true);
    const McTrajectory ser = monte_carlo_trajectories(model.spec, map, cfg, rho0, false);
    for (std::size_t k = 0; k < par.times.size(); ++k) {
        CHECK(max_abs(par.mean[k] - ser.mean[k]) == 0.0);
        CHECK((par.se_real[k] - ser.se_real[k]).cwiseAbs().maxCoeff() == 0.0);
    }
}

TEST_CASE("full-space oracle: parallel shell solves equal serial") {
    const BarrierModel model(10.0, 201);
    const DensityMatrix rho0 = thermal_state(model.spec, 1.0);
    OracleOptions par, ser;
    par.nodes = 301;
    ser.nodes = 301;
    ser.parallel = false;
    const OracleResult a = full_space_oracle(model.spec, model.pot, rho0, model.packet, par);
    const OracleResult b = full_space_oracle(model.spec, model.pot, rho0, model.packet, ser);
    CHECK(max_abs(a.rho - b.rho) == 0.0);
}
