// collision.hpp — eigenoperator tables T_Delta^{a'a}(E_p) built from
// scattering amplitudes, the exact single-collision map (Lamb shift +
// dissipator), its narrow-state reduction, and a brute-force joint-space
// oracle that never touches the map-assembly code path.

#pragma once

#include "qscat/channel.hpp"
#include "qscat/grid.hpp"
#include "qscat/operators.hpp"
#include "qscat/particle.hpp"

#include <memory>
#include <tuple>

namespace qscat {

// T_Delta^{a'a}(E_p) tabulated on a kinetic-energy grid; arbitrary-energy
// evaluation assembles from the amplitude source on demand.
class EigenOpTable {
  public:
    static EigenOpTable build(SystemSpec spec, EnergyGrid grid,
                              std::shared_ptr<const AmplitudeSource> source,
                              bool parallel = true);

    const SystemSpec& spec() const { return spec_; }
    const EnergyGrid& grid() const { return grid_; }
    const std::vector<double>& deltas() const { return deltas_; }
    std::size_t n_deltas() const { return deltas_.size(); }

    // Cached on-grid value.
    const Matrix& at_node(std::size_t node, std::size_t delta_idx, int dir_out,
                          int dir_in) const;

    // Tensor of all (delta, dir_out, dir_in) components at arbitrary Ep;
    // layout index = (delta_idx * 2 + dir_out) * 2 + dir_in.
    std::vector<Matrix> eval(double ep) const;

    Matrix T(double ep, std::size_t delta_idx, int dir_out, int dir_in) const;

    // Summed amplitude operator sum_Delta T_Delta^{a'a}(Ep).
    Matrix script_T(double ep, int dir_out, int dir_in) const;

  private:
    SystemSpec spec_;
    EnergyGrid grid_;
    std::shared_ptr<const AmplitudeSource> source_;
    std::vector<double> deltas_;
    std::vector<Matrix> cache_;  // node-major, then (delta, dir_out, dir_in)

    std::size_t flat(std::size_t node, std::size_t d, int dp, int di) const;
};

struct MapDiagnostics {
    double dropped_weight = 0.0;  // particle weight at shifts outside grid coverage
    double closed_weight = 0.0;   // particle weight hitting closed-channel shifts
};

// First-order operator X = int dEp sum_{Delta,a,a'} T_Delta^{a'a}(Ep)
// rho_P^{aa'}(Ep, Ep - Delta); the Lamb shift is (X + X^dag)/2 and the
// aggregated response is -i Tr([A, X] rho_S).
Matrix assemble_first_order(const EigenOpTable& eig, const ParticleEnergyState& rho_P,
                            MapDiagnostics* diag = nullptr, bool parallel = true);

HermitianOperator build_lamb_shift(const EigenOpTable& eig, const ParticleEnergyState& rho_P,
                                   MapDiagnostics* diag = nullptr, bool parallel = true);

struct ObservableChange {
    double lamb_shift = 0.0;
    double dissipative = 0.0;
    double total = 0.0;
};

class CollisionMap {
  public:
    static CollisionMap build(std::shared_ptr<const EigenOpTable> eig,
                              ParticleEnergyState rho_P, bool parallel = true);

    const HermitianOperator& lamb_shift() const { return h_ls_; }
    const MapDiagnostics& diagnostics() const { return diag_; }
    const EigenOpTable& eigenops() const { return *eig_; }
    const ParticleEnergyState& particle() const { return rho_P_; }
    int dim() const { return eig_->spec().dim(); }

    // Second-order (gain minus anticommutator) part of the map applied to
    // an arbitrary matrix; linear, Hermiticity-preserving, traceless to
    // roundoff.
    Matrix dissipator(const Matrix& rho, bool parallel = true) const;

    // rho - i [H_LS, rho] + D(rho) on an arbitrary matrix.
    Matrix apply_linear(const Matrix& rho, bool parallel = true) const;

    // Validated single-collision update; positivity beyond -1e-6 throws.
    DensityMatrix apply(const DensityMatrix& rho) const;

    ObservableChange observable_changes(const DensityMatrix& rho,
                                        const HermitianOperator& obs) const;

    // (N^2 x N^2) matrix of apply_linear in column-major vec convention.
    const Matrix& superoperator() const;
    // (N^2 x N^2) matrix of the dissipator alone.
    Matrix dissipator_superoperator() const;

    // Choi matrix sum_{kl} |k><l| (x) Phi(|k><l|).
    Matrix choi() const;

  private:
    struct Pair {
        std::size_t da, db;   // delta indices
        int dir_a, dir_b;     // particle directions
        std::size_t shift;    // index into shifts_
    };

    std::shared_ptr<const EigenOpTable> eig_;
    ParticleEnergyState rho_P_;
    HermitianOperator h_ls_{Matrix::Zero(1, 1)};
    MapDiagnostics diag_;
    std::vector<double> shifts_;  // distinct Delta_b - Delta_a values
    std::vector<Pair> pairs_;     // unordered (a <= b) index pairs
    // per node: tensors per shift (same layout as EigenOpTable::eval) and
    // coherence per pair
    std::vector<std::vector<std::vector<Matrix>>> node_tensors_;
    std::vector<std::vector<Complex>> node_coherence_;
    mutable std::unique_ptr<Matrix> superop_;
};

// Dedicated narrow-state (diagonal-ensemble) forms; independent code from the
// generic assembly, used to cross-check the reduction.
HermitianOperator narrow_lamb_shift(const EigenOpTable& eig, const ParticleEnergyState& rho_P);
Matrix narrow_dissipator(const EigenOpTable& eig, const ParticleEnergyState& rho_P,
                         const Matrix& rho);

struct OracleOptions {
    std::size_t nodes = 1201;       // requested grid size (adjusted for commensurability)
    std::size_t max_nodes = 60000;  // memory guard
    bool parallel = true;
};

struct OracleResult {
    Matrix rho;            // post-collision system state
    double leaked = 0.0;   // norm lost through grid-edge shells
    std::size_t grid_size = 0;
};

// Discretizes the joint energy-direction space on a uniform grid whose step
// divides every Bohr gap, builds the unitary S shell by shell from
// solve_smatrix, forms S rho S^dag and partial-traces the particle.
OracleResult full_space_oracle(const SystemSpec& spec, const PotentialSpec& pot,
                               const DensityMatrix& rho_S, const ParticleEnergyState& rho_P,
                               const OracleOptions& opt = {});

}  // namespace qscat
