// channel.hpp — exact multichannel S-matrices for piecewise-constant matrix
// potentials in 1D, computed by layer-wise scattering-matrix composition
// (Redheffer star product), plus first-order Born amplitudes and the
// unitarity / optical-theorem reports.

#pragma once

#include "qscat/grid.hpp"
#include "qscat/operators.hpp"
#include "qscat/potential.hpp"

#include <memory>
#include <stdexcept>
#include <vector>

namespace qscat {

inline constexpr double kThresholdEps = 1e-8;

struct ThresholdError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Flux-normalized scattering matrix at one total energy, restricted to open
// channels. Row/column index = dir * n_open + position of j in `open`.
struct SMatrixBlock {
    double energy = 0.0;
    int dim = 0;                // number of system levels N
    std::vector<int> open;      // open channel indices, ascending
    Matrix s;                   // (2 n_open) x (2 n_open)

    int n_open() const { return static_cast<int>(open.size()); }
    bool is_open(int j) const;
    int open_index(int j) const;  // -1 if closed

    Complex s_entry(int dir_out, int j_out, int dir_in, int j_in) const;
    // t = i (s - 1), so that s = 1 - i t.
    Complex t_entry(int dir_out, int j_out, int dir_in, int j_in) const;

    // Full-channel amplitude matrix, zeros on closed rows/columns;
    // index = dir * N + j.
    Matrix t_full() const;
};

// Solves the coupled-channel stationary problem at total energy E.
SMatrixBlock solve_smatrix(const SystemSpec& spec, const PotentialSpec& pot, double E);

struct UnitarityReport {
    double max_dev_left = 0.0;    // max |s^dag s - 1|
    double max_dev_right = 0.0;   // max |s s^dag - 1|
    double max_prob_dev = 0.0;    // max |sum of transition probabilities - 1|
    double max() const;
};

UnitarityReport verify_unitarity(const SMatrixBlock& block);

struct OpticalReport {
    double max_identity_dev = 0.0;  // i(t - t^dag) = t^dag t, entrywise
    double max_im_forward = 0.0;    // max Im t^{aa}_{jj} (must be <= 0)
    double max_forward_dev = 0.0;   // |Im t^{aa}_{jj} + sigma_j/2|
    double min_sigma_eig = 0.0;     // smallest eigenvalue of the Gram matrices
};

OpticalReport verify_optical_theorem(const SMatrixBlock& block);

// First-order (Born) amplitude 2*pi <E'^{a'}, j'|V|E^{a}, j> at incident
// kinetic energy Ep, with E' = Ep + e_j - e_j'. Closed outgoing channel or
// nonpositive Ep throw.
Complex born_amplitude(const SystemSpec& spec, const PotentialSpec& pot, int j, int dir,
                       int j_out, int dir_out, double Ep);

// Uniform access to flux-normalized amplitudes t for the map assembly;
// implementations differ in how they obtain them.
struct AmplitudeSource {
    virtual ~AmplitudeSource() = default;
    virtual Matrix t_full(double E_total) const = 0;
    virtual int dim() const = 0;
};

// Solves the scattering problem at every query (energies nudged off channel
// thresholds by a fixed offset).
class ExactAmplitudes final : public AmplitudeSource {
  public:
    ExactAmplitudes(SystemSpec spec, PotentialSpec pot);
    Matrix t_full(double E_total) const override;
    int dim() const override { return spec_.dim(); }

  private:
    SystemSpec spec_;
    PotentialSpec pot_;
};

// Born-approximation amplitudes (used for the weak-coupling bridge checks).
class BornAmplitudes final : public AmplitudeSource {
  public:
    BornAmplitudes(SystemSpec spec, PotentialSpec pot);
    Matrix t_full(double E_total) const override;
    int dim() const override { return spec_.dim(); }

  private:
    SystemSpec spec_;
    PotentialSpec pot_;
};

// Precomputed amplitude table over a total-energy range with entrywise cubic
// interpolation. The grid is split at channel thresholds so no stencil ever
// straddles a branch point.
class SMatrixTable final : public AmplitudeSource {
  public:
    static SMatrixTable build(const SystemSpec& spec, const PotentialSpec& pot, double e_lo,
                              double e_hi, std::size_t nodes, bool parallel = true);

    Matrix t_full(double E_total) const override;
    int dim() const override { return dim_; }

    double lo() const { return lo_; }
    double hi() const { return hi_; }
    std::size_t node_count() const;

  private:
    struct Interval {
        std::vector<double> nodes;
        // per (dir'*N + j', dir*N + j) flattened entry: values over nodes
        std::vector<std::vector<Complex>> entries;
    };

    int dim_ = 0;
    double lo_ = 0.0, hi_ = 0.0;
    double e_min_sys_ = 0.0;
    std::vector<Interval> intervals_;
};

// Shifts E away from any |E - e_j| < width window (used when building grids
// and tables; solver queries must stay clear of branch points).
double nudge_off_thresholds(double e_total, const std::vector<double>& thresholds,
                            double width = 4.0 * kThresholdEps);

}  // namespace qscat
