// kubo.hpp — Born-approximation response spectra, the causal convolution of
// the response function with the force of a localized classical trajectory,
// a driven-unitary integrator used as an independent oracle, and the
// closed-system linear-response machinery (susceptibility, classical FDR).

#pragma once

#include "qscat/operators.hpp"
#include "qscat/particle.hpp"
#include "qscat/potential.hpp"

#include <vector>

namespace qscat {

struct KuboConfig {
    SystemSpec spec;
    PotentialSpec pot;
    Matrix rho_S;   // stationary initial state (defaults to thermal upstream)
    Matrix obs;     // observable A
    double x0 = 0.0;
    double v0 = 1.0;
    double step = 0.0;     // driven-oracle max step (0 -> adaptive choice)
    double horizon = 0.0;  // if > 0, the force support must fit in [-horizon, horizon]
};

// chi^l_Delta = -i Tr([A, V^l_Delta] rho_S) per decomposition term l.
struct BornSpectrum {
    // per term: (Delta, chi^l_Delta), Deltas ascending
    std::vector<std::vector<std::pair<double, Complex>>> per_term;
};

BornSpectrum born_response_spectrum(const SystemSpec& spec, const PotentialSpec& pot,
                                    const Matrix& rho_S, const Matrix& obs);

struct KuboResult {
    double value = 0.0;        // half-line (causal) convolution
    double full_line = 0.0;    // same integral without the causal restriction
    double imag_residue = 0.0; // |imaginary part| of the closed-form sum
};

// Closed-form boxcar x complex-exponential integrals; no time discretization.
KuboResult kubo_convolution(const KuboConfig& cfg);

struct DrivenResult {
    std::vector<double> times;
    std::vector<double> delta_a;
    double value_at_zero = 0.0;  // delta A at t = 0, the packet-at-x0 instant
    double trace_err = 0.0;
    double herm_err = 0.0;
    std::size_t steps = 0;
};

// Integrates d rho/dt = -(i/hbar)[H_S + sum_l lambda^l(t) V_S^l, rho] with
// adaptive embedded 4th/5th-order stepping across the traversal window.
DrivenResult driven_unitary_oracle(const KuboConfig& cfg, double rtol = 1e-12,
                                   double atol = 1e-14);

// First-order response integrated against the quantum force
// f^l(t) = Tr_P[V_P^l rho_P(t)] of a free Gaussian packet (dispersion
// included, boxcar overlaps reduced to error functions); `time_nodes`
// controls the Simpson rule.
Complex born_chi_quantum_force(const KuboConfig& cfg, double mass, double p0, double sigma_p,
                               std::size_t time_nodes = 40001);

struct ClassicalLrtReport {
    double max_phi_mismatch = 0.0;   // Delta-sum vs direct commutator route
    double max_a12_dev = 0.0;        // Im chi_AA = -(1/hbar) tanh C_AA at impulses
    double max_im_chi = 0.0;         // max |Im chi| over impulses (diagnostic)
    std::vector<double> impulse_omegas;
    std::vector<Complex> chi_omega;  // susceptibility on the omega grid
};

// Appendix-style closed-system linear response: response function phi_AV,
// susceptibility via damped half-line integrals extrapolated to zero damping,
// correlation impulses, and the classical FDR check.
ClassicalLrtReport classical_lrt_suite(const SystemSpec& spec, const Matrix& obs,
                                       const Matrix& drive, double beta,
                                       const std::vector<double>& omega_grid);

}  // namespace qscat
