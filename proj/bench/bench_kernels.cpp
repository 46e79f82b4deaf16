// Timing comparison of the OpenMP kernels against their serial reference
// paths: amplitude-table construction, map assembly, dissipator application
// and Monte Carlo trajectory averaging.

#include "qscat/collision.hpp"
#include "qscat/qme.hpp"

#include <chrono>
#include <cstdio>
#include <functional>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace qscat;

namespace {

double seconds(const std::function<void()>& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count();
}

}  // namespace

int main() {
#ifdef _OPENMP
    std::printf("threads: %d\n", omp_get_max_threads());
#else
    std::printf("threads: 1 (OpenMP disabled)\n");
#endif

    const SystemSpec spec = two_level(1.0);
    Matrix sx(2, 2);
    sx << 0, 1, 1, 0;
    const PotentialSpec pot = barrier_potential(1.0, sx, 10.0, -0.5, 0.5);
    const EnergyGrid grid = EnergyGrid::momentum_uniform(1.0, 98.8, 101.2, 2001);
    const ParticleEnergyState packet =
        ParticleEnergyState::gaussian_wavepacket(1.0, 100.0, 2.0, 0.2, grid);

    const double e_lo = grid.lo() - 2.5, e_hi = grid.hi() + 2.5;
    const double t_table_par = seconds(
        [&] { SMatrixTable::build(spec, pot, e_lo, e_hi, 4001, true); });
    const double t_table_ser = seconds(
        [&] { SMatrixTable::build(spec, pot, e_lo, e_hi, 4001, false); });
    std::printf("table build     serial %8.3fs   parallel %8.3fs   speedup %.2fx\n",
                t_table_ser, t_table_par, t_table_ser / t_table_par);

    auto source = std::make_shared<SMatrixTable>(
        SMatrixTable::build(spec, pot, e_lo, e_hi, 4001, true));

    std::shared_ptr<EigenOpTable> eig;
    const double t_eig_par = seconds([&] {
        eig = std::make_shared<EigenOpTable>(EigenOpTable::build(spec, grid, source, true));
    });
    const double t_eig_ser = seconds(
        [&] { EigenOpTable::build(spec, grid, source, false); });
    std::printf("eigenop table   serial %8.3fs   parallel %8.3fs   speedup %.2fx\n",
                t_eig_ser, t_eig_par, t_eig_ser / t_eig_par);

    std::unique_ptr<CollisionMap> map;
    CollisionMap::build(eig, packet, true);  // warm the pool and the page cache
    const double t_map_ser = seconds([&] { CollisionMap::build(eig, packet, false); });
    const double t_map_par = seconds([&] {
        map = std::make_unique<CollisionMap>(CollisionMap::build(eig, packet, true));
    });
    std::printf("map assembly    serial %8.3fs   parallel %8.3fs   speedup %.2fx\n",
                t_map_ser, t_map_par, t_map_ser / t_map_par);

    const Matrix rho = thermal_state(spec, 1.0).matrix();
    double sink = 0.0;
    const double t_diss_ser = seconds([&] {
        for (int k = 0; k < 20; ++k) sink += max_abs(map->dissipator(rho, false));
    });
    const double t_diss_par = seconds([&] {
        for (int k = 0; k < 20; ++k) sink += max_abs(map->dissipator(rho, true));
    });
    std::printf("dissipator x20  serial %8.3fs   parallel %8.3fs   speedup %.2fx\n",
                t_diss_ser, t_diss_par, t_diss_ser / t_diss_par);

    QmeConfig qc;
    qc.gamma = 2.0;
    qc.t_final = 20.0;
    qc.sample_times = {5.0, 10.0, 15.0, 20.0};
    qc.trajectories = 20000;
    qc.seed = 42;
    const DensityMatrix rho0 = thermal_state(spec, 1.0);
    (void)map->superoperator();  // shared precomputation outside the timing
    monte_carlo_trajectories(spec, *map, qc, rho0, true);  // warmup
    const double t_mc_ser = seconds(
        [&] { monte_carlo_trajectories(spec, *map, qc, rho0, false); });
    const double t_mc_par = seconds(
        [&] { monte_carlo_trajectories(spec, *map, qc, rho0, true); });
    std::printf("monte carlo     serial %8.3fs   parallel %8.3fs   speedup %.2fx\n",
                t_mc_ser, t_mc_par, t_mc_ser / t_mc_par);

    std::printf("checksum %.6e\n", sink);
    return 0;
}
