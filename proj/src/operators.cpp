#include "qscat/operators.hpp"

#include <algorithm>
#include <cmath>

namespace qscat {

double SystemSpec::energy_spread() const {
    if (energies.empty()) return 0.0;
    return energies.back() - energies.front();
}

Matrix SystemSpec::hamiltonian() const {
    Matrix h = Matrix::Zero(dim(), dim());
    for (int j = 0; j < dim(); ++j) h(j, j) = energies[j];
    return h;
}

void SystemSpec::validate() const {
    if (energies.empty()) throw std::invalid_argument("SystemSpec: N >= 1 required");
    if (!(hbar > 0.0)) throw std::invalid_argument("SystemSpec: hbar must be > 0");
    for (std::size_t j = 1; j < energies.size(); ++j) {
        if (energies[j] < energies[j - 1])
            throw std::invalid_argument("SystemSpec: energies must be nondecreasing");
    }
    for (double e : energies) {
        if (!std::isfinite(e)) throw std::invalid_argument("SystemSpec: non-finite energy");
    }
    if (!labels.empty() && labels.size() != energies.size())
        throw std::invalid_argument("SystemSpec: label count mismatch");
}

SystemSpec make_system(std::vector<double> energies, double hbar) {
    SystemSpec s;
    s.energies = std::move(energies);
    s.hbar = hbar;
    s.validate();
    return s;
}

SystemSpec two_level(double delta, double hbar) {
    return make_system({-0.5 * delta, 0.5 * delta}, hbar);
}

double max_abs(const Matrix& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

HermitianOperator::HermitianOperator(Matrix m, double tol) : m_(std::move(m)) {
    if (m_.rows() != m_.cols())
        throw std::invalid_argument("HermitianOperator: matrix must be square");
    const double scale = std::max(1.0, max_abs(m_));
    if (max_abs(m_ - m_.adjoint().eval()) > tol * scale)
        throw std::invalid_argument("HermitianOperator: matrix is not Hermitian");
    // symmetrize away the roundoff so downstream algebra sees an exact adjoint
    m_ = 0.5 * (m_ + m_.adjoint().eval());
}

DensityMatrix::DensityMatrix(Matrix m, double trace_tol, double psd_tol, double herm_tol)
    : op_(std::move(m), herm_tol) {
    const double tr_err = std::abs(op_.matrix().trace() - Complex(1.0, 0.0));
    if (tr_err > trace_tol)
        throw std::invalid_argument("DensityMatrix: trace differs from 1 by " +
                                    std::to_string(tr_err));
    Eigen::SelfAdjointEigenSolver<Matrix> es(op_.matrix(), Eigen::EigenvaluesOnly);
    const double min_eig = es.eigenvalues().minCoeff();
    if (min_eig < -psd_tol)
        throw std::invalid_argument("DensityMatrix: negative eigenvalue " +
                                    std::to_string(min_eig));
}

Matrix BohrDecomposition::reconstruct() const {
    if (terms.empty()) return Matrix();
    Matrix sum = Matrix::Zero(terms.front().op.rows(), terms.front().op.cols());
    for (const auto& t : terms) sum += t.op;
    return sum;
}

const Matrix* BohrDecomposition::find(double delta, double tol) const {
    for (const auto& t : terms)
        if (std::abs(t.delta - delta) <= tol) return &t.op;
    return nullptr;
}

DensityMatrix thermal_state(const SystemSpec& spec, double beta) {
    spec.validate();
    if (!std::isfinite(beta)) throw std::invalid_argument("thermal_state: beta must be finite");
    const int n = spec.dim();
    const double e_min = spec.energies.front();
    RealVector w(n);
    for (int j = 0; j < n; ++j) w(j) = std::exp(-beta * (spec.energies[j] - e_min));
    w /= w.sum();
    Matrix rho = Matrix::Zero(n, n);
    for (int j = 0; j < n; ++j) rho(j, j) = w(j);
    return DensityMatrix(std::move(rho));
}

Matrix heisenberg(const SystemSpec& spec, const Matrix& op, double t) {
    const int n = spec.dim();
    if (op.rows() != n || op.cols() != n)
        throw std::invalid_argument("heisenberg: dimension mismatch");
    Matrix out(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c)
            out(r, c) = op(r, c) *
                        std::exp(kI * ((spec.energies[r] - spec.energies[c]) * t / spec.hbar));
    return out;
}

std::vector<double> bohr_frequencies(const SystemSpec& spec) {
    const int n = spec.dim();
    std::vector<double> diffs;
    diffs.reserve(static_cast<std::size_t>(n) * n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) diffs.push_back(spec.energies[r] - spec.energies[c]);
    std::sort(diffs.begin(), diffs.end());
    const double tol = spec.bohr_tol();
    std::vector<double> merged;
    for (double d : diffs) {
        if (merged.empty() || d - merged.back() > tol)
            merged.push_back(d);
    }
    return merged;
}

BohrDecomposition bohr_decompose(const SystemSpec& spec, const Matrix& op) {
    const int n = spec.dim();
    if (op.rows() != n || op.cols() != n)
        throw std::invalid_argument("bohr_decompose: dimension mismatch");
    const auto deltas = bohr_frequencies(spec);
    const double tol = spec.bohr_tol();
    BohrDecomposition dec;
    dec.terms.reserve(deltas.size());
    for (double d : deltas) dec.terms.push_back({d, Matrix::Zero(n, n)});
    for (int r = 0; r < n; ++r) {
        for (int c = 0; c < n; ++c) {
            const double d = spec.energies[r] - spec.energies[c];
            auto it = std::lower_bound(deltas.begin(), deltas.end(), d - tol);
            const auto idx = static_cast<std::size_t>(it - deltas.begin());
            dec.terms[idx].op(r, c) = op(r, c);
        }
    }
    // keep only components that actually carry weight, but never drop all terms
    std::vector<BohrTerm> kept;
    for (auto& t : dec.terms)
        if (max_abs(t.op) > 0.0) kept.push_back(std::move(t));
    if (kept.empty()) kept.push_back({0.0, Matrix::Zero(n, n)});
    dec.terms = std::move(kept);
    return dec;
}

}  // namespace qscat
