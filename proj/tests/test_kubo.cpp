#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qscat/kubo.hpp"
#include "qscat/response.hpp"

#include "test_util.hpp"

#include <cmath>

using namespace qscat;
using testutil::sigma_x;
using testutil::sigma_z;

namespace {

KuboConfig two_level_drive(double v0_strength, double beta = 1.0, double x0 = 2.0,
                           double speed = 1.0) {
    KuboConfig cfg;
    cfg.spec = two_level(1.0);
    cfg.pot = barrier_potential(1.0, sigma_x(), v0_strength, -0.5, 0.5);
    cfg.rho_S = thermal_state(cfg.spec, beta).matrix();
    cfg.obs = sigma_x();
    cfg.x0 = x0;
    cfg.v0 = speed;
    return cfg;
}

// closed form for the two-level boxcar drive: the response function is
// (2 tanh(beta gap/2)/hbar) sin(gap u/hbar) integrated over the window
double closed_form(double v0_strength, double beta, double gap, double x0, double speed,
                   double xl, double xr) {
    const double u1 = (xl - x0) / speed;
    const double u2 = (xr - x0) / speed;
    return (2.0 * v0_strength / gap) * std::tanh(0.5 * beta * gap) *
           (std::cos(gap * u1) - std::cos(gap * u2));
}

}  // namespace

TEST_CASE("born response spectrum: explicit two-level algebra") {
    const SystemSpec spec = two_level(1.0);
    const PotentialSpec pot = barrier_potential(1.0, sigma_x(), 2.0, -0.5, 0.5);
    const double beta = 1.0;
    const Matrix omega = thermal_state(spec, beta).matrix();
    const BornSpectrum sp = born_response_spectrum(spec, pot, omega, sigma_x());
    REQUIRE(sp.per_term.size() == 1);
    REQUIRE(sp.per_term[0].size() == 2);  // sigma_x has no Delta = 0 part
    const double th = std::tanh(0.5 * beta);
    CHECK(std::abs(sp.per_term[0][0].second - Complex(0.0, th)) < 1e-14);   // Delta = -1
    CHECK(std::abs(sp.per_term[0][1].second - Complex(0.0, -th)) < 1e-14);  // Delta = +1

    // identity observable: everything vanishes
    const BornSpectrum none = born_response_spectrum(spec, pot, omega, Matrix::Identity(2, 2));
    for (const auto& [delta, chi] : none.per_term[0]) CHECK(std::abs(chi) < 1e-15);

    // commuting drive: single Delta = 0 term with the direct trace value
    const PotentialSpec pot_z = barrier_potential(1.0, sigma_z(), 1.0, -0.5, 0.5);
    std::mt19937_64 rng(3);
    const Matrix rho = testutil::random_density(2, rng);
    const BornSpectrum com = born_response_spectrum(spec, pot_z, rho, sigma_x());
    REQUIRE(com.per_term[0].size() == 1);
    CHECK(com.per_term[0][0].first == doctest::Approx(0.0));
    const Complex direct = -kI * ((sigma_x() * sigma_z() - sigma_z() * sigma_x()) * rho).trace();
    CHECK(std::abs(com.per_term[0][0].second - direct) < 1e-14);
}

TEST_CASE("kubo convolution matches the symbolic closed form to machine precision") {
    for (double strength : {0.5, 2.0}) {
        for (double x0 : {0.5, 2.0, 7.0}) {
            const KuboConfig cfg = two_level_drive(strength, 1.0, x0);
            const KuboResult res = kubo_convolution(cfg);
            CHECK(res.imag_residue < 1e-12);
            const double expected = closed_form(strength, 1.0, 1.0, x0, 1.0, -0.5, 0.5);
            CHECK(std::abs(res.value - expected) < 1e-12);
            CHECK(std::abs(res.full_line - expected) < 1e-12);  // x0 beyond the barrier
        }
    }

    PotentialSpec none;
    none.mass = 1.0;
    KuboConfig empty = two_level_drive(1.0);
    empty.pot = none;
    CHECK(kubo_convolution(empty).value == 0.0);

    KuboConfig tight = two_level_drive(1.0);
    tight.horizon = 0.1;  // support [-2.5, -1.5] does not fit
    CHECK_THROWS_AS(kubo_convolution(tight), std::invalid_argument);
}

TEST_CASE("causality: with x0 at or beyond the edge the force lies in the past") {
    const KuboConfig at_edge = two_level_drive(1.0, 1.0, 0.5);  // x0 = x_max
    const ForceProfile fp = force_profile(at_edge.pot, at_edge.x0, at_edge.v0);
    CHECK(fp.support().second <= 0.0);
    const ForceProfile fp2 = force_profile(at_edge.pot, 2.0, at_edge.v0);
    CHECK(fp2.support().second < 0.0);
    // consequently the causal and unrestricted convolutions coincide
    const KuboResult res = kubo_convolution(at_edge);
    CHECK(res.value == doctest::Approx(res.full_line).epsilon(1e-14));
}

TEST_CASE("driven unitary oracle: free evolution, conservation, second-order scaling") {
    KuboConfig free_cfg = two_level_drive(0.0);
    free_cfg.pot = barrier_potential(1.0, sigma_x(), 0.0, -0.5, 0.5);
    const DrivenResult quiet = driven_unitary_oracle(free_cfg);
    CHECK(std::abs(quiet.value_at_zero) < 1e-12);

    // the observable needs both a coherence and a population part: with a
    // pure sigma_x drive on a diagonal state, <sigma_x> only receives
    // odd-order corrections and the remainder would drop to O(V0^3)
    double prev_ratio = 0.0;
    for (int k = 0; k < 4; ++k) {
        const double strength = 0.02 / (1 << k);
        KuboConfig cfg = two_level_drive(strength);
        cfg.obs = sigma_x() + sigma_z();
        const DrivenResult driven = driven_unitary_oracle(cfg);
        CHECK(driven.trace_err < 1e-10);
        CHECK(driven.herm_err < 1e-10);
        const KuboResult kubo = kubo_convolution(cfg);
        const double ratio = std::abs(driven.value_at_zero - kubo.value) /
                             (strength * strength);
        if (k > 0) {
            CHECK(ratio < 2.0 * prev_ratio);
            CHECK(ratio > 0.5 * prev_ratio);
        }
        prev_ratio = ratio;
    }

    // pure sigma_x observable: the remainder is bounded by V0^2 as well
    // (it is in fact third order, so the normalized ratio may only shrink)
    double prev = 1e300;
    for (int k = 0; k < 3; ++k) {
        const double strength = 0.02 / (1 << k);
        const KuboConfig cfg = two_level_drive(strength);
        const double ratio =
            std::abs(driven_unitary_oracle(cfg).value_at_zero - kubo_convolution(cfg).value) /
            (strength * strength);
        CHECK(ratio <= prev * (1.0 + 1e-6));
        prev = ratio;
    }
}

TEST_CASE("classical linear response: fdr at impulses, commuting and infinite-T limits") {
    const SystemSpec spec = two_level(1.0);
    std::vector<double> omegas{-1.5, -0.2, 0.6, 1.8};
    const ClassicalLrtReport rep =
        classical_lrt_suite(spec, sigma_x(), sigma_x(), 1.0, omegas);
    CHECK(rep.max_phi_mismatch < 1e-12);
    CHECK(rep.max_a12_dev < 1e-6);
    REQUIRE(rep.impulse_omegas.size() == 2);
    CHECK(rep.chi_omega.size() == omegas.size());

    // commuting observable and drive: the response function vanishes
    const Matrix omega_state = thermal_state(spec, 1.0).matrix();
    for (double t : {0.0, 0.7, 2.3}) {
        const Matrix a_t = heisenberg(spec, sigma_z(), t);
        const Complex phi =
            (-kI / spec.hbar) * ((a_t * sigma_z() - sigma_z() * a_t) * omega_state).trace();
        CHECK(std::abs(phi) < 1e-15);
    }

    // beta = 0: no dissipative (imaginary) part at any impulse
    const ClassicalLrtReport cold =
        classical_lrt_suite(spec, sigma_x(), sigma_x(), 0.0, omegas);
    CHECK(cold.max_im_chi < 1e-12);
}

TEST_CASE("born bridge: map assembly with born amplitudes equals the force-picture sum") {
    const SystemSpec spec = two_level(1.0);
    const PotentialSpec pot = barrier_potential(1.0, sigma_x(), 10.0, -0.5, 0.5);
    const EnergyGrid grid = EnergyGrid::momentum_uniform(1.0, 98.8, 101.2, 2001);
    const auto packet = ParticleEnergyState::gaussian_wavepacket(1.0, 100.0, 2.0, 0.2, grid);
    const auto eig = std::make_shared<EigenOpTable>(
        EigenOpTable::build(spec, grid, std::make_shared<BornAmplitudes>(spec, pot)));
    const Matrix omega = thermal_state(spec, 1.0).matrix();

    const Complex chi_energy = chi_aggregate(*eig, omega, sigma_x(), packet);

    KuboConfig cfg;
    cfg.spec = spec;
    cfg.pot = pot;
    cfg.rho_S = omega;
    cfg.obs = sigma_x();
    cfg.x0 = 2.0;
    cfg.v0 = 100.0;
    const Complex chi_force = born_chi_quantum_force(cfg, 1.0, 100.0, 0.2);

    CHECK(std::abs(chi_energy - chi_force) < 1e-8);
}

TEST_CASE("quantum force converges to the classical-trajectory convolution") {
    KuboConfig cfg;
    cfg.spec = two_level(1.0);
    cfg.pot = barrier_potential(1.0, sigma_x(), 10.0, -0.5, 0.5);
    cfg.rho_S = thermal_state(cfg.spec, 1.0).matrix();
    cfg.obs = sigma_x();
    cfg.x0 = 2.0;
    cfg.v0 = 100.0;
    const double classical = kubo_convolution(cfg).full_line;

    double prev = -1.0;
    for (double sigma_p : {0.05, 0.2, 0.8}) {
        const Complex quantum = born_chi_quantum_force(cfg, 1.0, 100.0, sigma_p);
        const double diff = std::abs(quantum.real() - classical);
        if (prev >= 0.0) CHECK(diff < prev);
        prev = diff;
    }
    CHECK(prev < 1e-3 * std::abs(classical) + 1e-12);
}
