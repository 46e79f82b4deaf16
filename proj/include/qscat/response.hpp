// response.hpp — non-perturbative response of a system observable to a
// collision: spectral components chi_Delta, their aggregation over the
// particle state, time-domain response/correlation functions, the
// fluctuation-dissipation relation, and the continuous-transform variants.

#pragma once

#include "qscat/collision.hpp"
#include "qscat/operators.hpp"
#include "qscat/particle.hpp"

#include <vector>

namespace qscat {

// chi_Delta^{a'a}(Ep) = -i Tr([A, T_Delta^{a'a}(Ep)] rho_S)
Complex chi_delta(const EigenOpTable& eig, const Matrix& rho_S, const Matrix& obs,
                  std::size_t delta_idx, int dir_out, int dir_in, double ep);

// C_Delta^{a'a}(Ep) = (1/2) Tr({A, T_Delta^{a'a}(Ep)} rho_S)
Complex corr_delta(const EigenOpTable& eig, const Matrix& rho_S, const Matrix& obs,
                   std::size_t delta_idx, int dir_out, int dir_in, double ep);

// Aggregated complex response; Re equals the Lamb-shift observable change.
Complex chi_aggregate(const EigenOpTable& eig, const Matrix& rho_S, const Matrix& obs,
                      const ParticleEnergyState& rho_P);

// Time-domain response (1/2 pi hbar) sum_Delta e^{-i Delta t/hbar} chi_Delta,
// evaluated both from the Delta sum and from the direct commutator with the
// Heisenberg-evolved summed amplitude operator; max of |difference| returned.
struct TimeDomainResponse {
    std::vector<Complex> from_deltas;
    std::vector<Complex> from_commutator;
    double max_mismatch = 0.0;
};

TimeDomainResponse response_time_domain(const EigenOpTable& eig, const Matrix& rho_S,
                                        const Matrix& obs, double ep, int dir_out, int dir_in,
                                        const std::vector<double>& times);

// Per-(Delta, a', a) check of chi_Delta = -2i tanh(beta Delta/2) C_Delta for
// the thermal state, plus the real/imaginary split forms.
struct FdrReport {
    double max_dev = 0.0;        // full complex identity
    double max_dev_split = 0.0;  // Re/Im split forms
};

FdrReport fdr_check(const EigenOpTable& eig, const SystemSpec& spec, double beta,
                    const Matrix& obs, double ep);

// chi(omega) and C(omega) as weighted impulses: pairs (Delta, weight) in the
// measure delta(hbar*omega - Delta).
struct ImpulseSpectrum {
    std::vector<double> positions;  // Delta values
    std::vector<Complex> chi;       // chi_Delta
    std::vector<Complex> corr;      // hbar * C_Delta (weight of C(omega))
};

struct RetardedAdvancedSample {
    double omega = 0.0;
    Complex plus;     // retarded component (principal-value sum, no delta part)
    Complex minus;    // advanced component
    bool flagged = false;  // omega within pole window of some Delta/hbar
};

struct ContinuousTransforms {
    ImpulseSpectrum impulses;
    std::vector<RetardedAdvancedSample> samples;
    double max_fdr_impulse_dev = 0.0;  // FDR checked on impulse weights
};

// Evaluates the retarded/advanced split on omega_grid via the symmetric-window
// principal-value sum with Richardson extrapolation of the window width.
ContinuousTransforms continuous_transforms(const EigenOpTable& eig, const SystemSpec& spec,
                                           double beta, const Matrix& obs, double ep,
                                           int dir_out, int dir_in,
                                           const std::vector<double>& omega_grid,
                                           double pole_window = 1e-6);

// Bundled spectra over the grid for CSV emission.
struct ResponseSpectrum {
    struct Row {
        double ep = 0.0;
        double delta = 0.0;
        int dir_out = 0;
        int dir_in = 0;
        Complex chi;
        Complex corr;
    };
    std::vector<Row> rows;
    Complex chi_a;                      // aggregated response
    std::vector<double> times;          // sample times
    std::vector<Complex> chi_time;      // response at grid center energy (++)
    std::vector<Complex> corr_time;     // correlation at grid center energy (++)
};

ResponseSpectrum build_response_spectrum(const EigenOpTable& eig, const Matrix& rho_S,
                                         const Matrix& obs, const ParticleEnergyState& rho_P,
                                         const std::vector<double>& times,
                                         std::size_t energy_stride = 1);

}  // namespace qscat
