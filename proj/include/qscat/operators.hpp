// operators.hpp — N-level system description, Hermitian operators, thermal
// states, Heisenberg evolution and Bohr-frequency (eigenoperator) decomposition.
//
// Everything is stored in the eigenbasis of the system Hamiltonian, which is
// diagonal by construction.

#pragma once

#include <Eigen/Dense>

#include <complex>
#include <stdexcept>
#include <string>
#include <vector>

namespace qscat {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using Vector = Eigen::VectorXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Complex kI{0.0, 1.0};

// Direction index: 0 <-> alpha=+ (p > 0, incidence from the left),
// 1 <-> alpha=- (p < 0, incidence from the right).
enum Direction : int { kPlus = 0, kMinus = 1 };

// Discrete level structure: energies ascending, duplicates allowed.
struct SystemSpec {
    std::vector<double> energies;
    double hbar = 1.0;
    std::vector<std::string> labels;  // optional channel names

    int dim() const { return static_cast<int>(energies.size()); }

    double energy_spread() const;

    // Tolerance used to merge near-degenerate Bohr frequencies.
    double bohr_tol() const { return 1e-9 * energy_spread(); }

    Matrix hamiltonian() const;

    void validate() const;
};

SystemSpec make_system(std::vector<double> energies, double hbar = 1.0);

// Two-level system with gap `delta`, energies {-delta/2, +delta/2}.
SystemSpec two_level(double delta, double hbar = 1.0);

double max_abs(const Matrix& m);

// Dense Hermitian matrix, checked at construction.
class HermitianOperator {
  public:
    explicit HermitianOperator(Matrix m, double tol = 1e-12);

    const Matrix& matrix() const { return m_; }
    int dim() const { return static_cast<int>(m_.rows()); }

  private:
    Matrix m_;
};

// Unit-trace positive-semidefinite Hermitian operator.
class DensityMatrix {
  public:
    explicit DensityMatrix(Matrix m, double trace_tol = 1e-10,
                           double psd_tol = 1e-10, double herm_tol = 1e-12);

    const Matrix& matrix() const { return op_.matrix(); }
    const HermitianOperator& op() const { return op_; }
    int dim() const { return op_.dim(); }

  private:
    HermitianOperator op_;
};

struct BohrTerm {
    double delta = 0.0;  // energy difference e_{j'} - e_j
    Matrix op;           // component with that difference
};

struct BohrDecomposition {
    std::vector<BohrTerm> terms;  // deltas ascending, distinct

    Matrix reconstruct() const;
    const Matrix* find(double delta, double tol) const;
};

// Gibbs state exp(-beta H_S)/Z; exponents shifted by e_min to avoid overflow.
DensityMatrix thermal_state(const SystemSpec& spec, double beta);

// Heisenberg picture O(t) = e^{iHt/hbar} O e^{-iHt/hbar}; valid for any
// (not necessarily Hermitian) operator in the energy basis.
Matrix heisenberg(const SystemSpec& spec, const Matrix& op, double t);

// Sorted distinct Bohr frequencies e_{j'} - e_j, merged within bohr_tol().
std::vector<double> bohr_frequencies(const SystemSpec& spec);

BohrDecomposition bohr_decompose(const SystemSpec& spec, const Matrix& op);

}  // namespace qscat
