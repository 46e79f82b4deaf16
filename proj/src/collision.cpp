#include "qscat/collision.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qscat {

namespace {

std::size_t delta_index(const std::vector<double>& deltas, double d, double tol) {
    auto it = std::lower_bound(deltas.begin(), deltas.end(), d - tol);
    if (it == deltas.end() || std::abs(*it - d) > tol)
        throw std::logic_error("EigenOpTable: Bohr frequency lookup failed");
    return static_cast<std::size_t>(it - deltas.begin());
}

}  // namespace

std::size_t EigenOpTable::flat(std::size_t node, std::size_t d, int dp, int di) const {
    return ((node * deltas_.size() + d) * 2 + static_cast<std::size_t>(dp)) * 2 +
           static_cast<std::size_t>(di);
}

EigenOpTable EigenOpTable::build(SystemSpec spec, EnergyGrid grid,
                                 std::shared_ptr<const AmplitudeSource> source,
                                 bool parallel) {
    spec.validate();
    if (!source) throw std::invalid_argument("EigenOpTable: null amplitude source");
    if (source->dim() != spec.dim())
        throw std::invalid_argument("EigenOpTable: source dimension mismatch");
    if (!(grid.lo() > 0.0))
        throw std::invalid_argument("EigenOpTable: kinetic grid must be positive");

    EigenOpTable tab;
    tab.spec_ = std::move(spec);
    tab.grid_ = std::move(grid);
    tab.source_ = std::move(source);
    tab.deltas_ = bohr_frequencies(tab.spec_);

    const std::size_t g = tab.grid_.size();
    tab.cache_.resize(g * tab.deltas_.size() * 4);
    std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(g); ++i) {
        try {
            auto tensors = tab.eval(tab.grid_.nodes[static_cast<std::size_t>(i)]);
            for (std::size_t k = 0; k < tensors.size(); ++k)
                tab.cache_[static_cast<std::size_t>(i) * tensors.size() + k] =
                    std::move(tensors[k]);
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    return tab;
}

const Matrix& EigenOpTable::at_node(std::size_t node, std::size_t delta_idx, int dir_out,
                                    int dir_in) const {
    return cache_[flat(node, delta_idx, dir_out, dir_in)];
}

std::vector<Matrix> EigenOpTable::eval(double ep) const {
    const int n = spec_.dim();
    std::vector<Matrix> out(deltas_.size() * 4, Matrix::Zero(n, n));
    if (!(ep > 0.0)) return out;  // incoming channel closed everywhere

    std::vector<Matrix> tmats(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        if (j > 0 && spec_.energies[j] == spec_.energies[j - 1]) {
            tmats[static_cast<std::size_t>(j)] = tmats[static_cast<std::size_t>(j - 1)];
            continue;
        }
        tmats[static_cast<std::size_t>(j)] = source_->t_full(ep + spec_.energies[j]);
    }
    const double tol = std::max(spec_.bohr_tol(), 1e-300);
    for (int jp = 0; jp < n; ++jp) {
        for (int j = 0; j < n; ++j) {
            const std::size_t d =
                delta_index(deltas_, spec_.energies[jp] - spec_.energies[j], tol);
            for (int dp = 0; dp < 2; ++dp)
                for (int di = 0; di < 2; ++di)
                    out[(d * 2 + static_cast<std::size_t>(dp)) * 2 +
                        static_cast<std::size_t>(di)](jp, j) =
                        tmats[static_cast<std::size_t>(j)](dp * n + jp, di * n + j);
        }
    }
    return out;
}

Matrix EigenOpTable::T(double ep, std::size_t delta_idx, int dir_out, int dir_in) const {
    auto tensors = eval(ep);
    return tensors[(delta_idx * 2 + static_cast<std::size_t>(dir_out)) * 2 +
                   static_cast<std::size_t>(dir_in)];
}

Matrix EigenOpTable::script_T(double ep, int dir_out, int dir_in) const {
    const int n = spec_.dim();
    auto tensors = eval(ep);
    Matrix sum = Matrix::Zero(n, n);
    for (std::size_t d = 0; d < deltas_.size(); ++d)
        sum += tensors[(d * 2 + static_cast<std::size_t>(dir_out)) * 2 +
                       static_cast<std::size_t>(dir_in)];
    return sum;
}

Matrix assemble_first_order(const EigenOpTable& eig, const ParticleEnergyState& rho_P,
                            MapDiagnostics* diag, bool parallel) {
    const int n = eig.spec().dim();
    const auto& grid = eig.grid();
    const auto& deltas = eig.deltas();
    const std::size_t g = grid.size();
    const bool pure = rho_P.kind() == ParticleKind::PureWavepacket;

    std::vector<Matrix> node_x(g);
    std::vector<double> node_drop(g, 0.0), node_closed(g, 0.0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(g); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        const double e = grid.nodes[i];
        Matrix x = Matrix::Zero(n, n);
        for (std::size_t d = 0; d < deltas.size(); ++d) {
            const double e_partner = e - deltas[d];
            if (!(e_partner > 0.0)) {
                for (int di = 0; di < 2; ++di)
                    node_closed[i] += grid.weights[i] * rho_P.diagonal(e, di);
                continue;
            }
            if (pure && !rho_P.grid().contains(e_partner)) {
                for (int di = 0; di < 2; ++di)
                    node_drop[i] += grid.weights[i] * rho_P.diagonal(e, di);
                continue;
            }
            for (int dp = 0; dp < 2; ++dp)
                for (int di = 0; di < 2; ++di) {
                    const Complex c = rho_P.coherence(e, e_partner, di, dp);
                    if (c != Complex(0.0)) x += eig.at_node(i, d, dp, di) * c;
                }
        }
        node_x[i] = std::move(x);
    }

    Matrix x = Matrix::Zero(n, n);
    MapDiagnostics d{};
    for (std::size_t i = 0; i < g; ++i) {
        x += grid.weights[i] * node_x[i];
        d.dropped_weight += node_drop[i];
        d.closed_weight += node_closed[i];
    }
    if (diag != nullptr) *diag = d;
    return x;
}

HermitianOperator build_lamb_shift(const EigenOpTable& eig, const ParticleEnergyState& rho_P,
                                   MapDiagnostics* diag, bool parallel) {
    MapDiagnostics local{};
    const Matrix x = assemble_first_order(eig, rho_P, &local, parallel);
    if (diag != nullptr) *diag = local;
    if (local.dropped_weight > 1e-6)
        throw std::runtime_error("build_lamb_shift: dropped particle weight " +
                                 std::to_string(local.dropped_weight) +
                                 " exceeds 1e-6 (grid coverage too small)");
    return HermitianOperator(0.5 * (x + x.adjoint().eval()));
}

CollisionMap CollisionMap::build(std::shared_ptr<const EigenOpTable> eig,
                                 ParticleEnergyState rho_P, bool parallel) {
    if (!eig) throw std::invalid_argument("CollisionMap: null eigenoperator table");
    CollisionMap map;
    map.eig_ = std::move(eig);
    map.rho_P_ = std::move(rho_P);

    const auto& deltas = map.eig_->deltas();
    const double tol = std::max(map.eig_->spec().bohr_tol(), 1e-300);
    const std::size_t nl = deltas.size() * 2;  // linear index (delta, dir)

    // unordered pairs a <= b over (delta, direction) labels
    for (std::size_t a = 0; a < nl; ++a) {
        for (std::size_t b = a; b < nl; ++b) {
            Pair p;
            p.da = a / 2;
            p.dir_a = static_cast<int>(a % 2);
            p.db = b / 2;
            p.dir_b = static_cast<int>(b % 2);
            const double shift = deltas[p.db] - deltas[p.da];
            std::size_t s = 0;
            for (; s < map.shifts_.size(); ++s)
                if (std::abs(map.shifts_[s] - shift) <= tol) break;
            if (s == map.shifts_.size()) map.shifts_.push_back(shift);
            p.shift = s;
            map.pairs_.push_back(p);
        }
    }

    const auto& grid = map.eig_->grid();
    const std::size_t g = grid.size();
    map.node_tensors_.resize(g);
    map.node_coherence_.resize(g);
    std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(g); ++ii) {
        try {
            const auto i = static_cast<std::size_t>(ii);
            const double e = grid.nodes[i];
            auto& tensors = map.node_tensors_[i];
            tensors.resize(map.shifts_.size());
            for (std::size_t s = 0; s < map.shifts_.size(); ++s) {
                if (std::abs(map.shifts_[s]) <= tol) continue;  // node cache covers shift 0
                tensors[s] = map.eig_->eval(e + map.shifts_[s]);
            }
            auto& coh = map.node_coherence_[i];
            coh.resize(map.pairs_.size());
            for (std::size_t p = 0; p < map.pairs_.size(); ++p) {
                const auto& pr = map.pairs_[p];
                const double ep = e - deltas[pr.da] + deltas[pr.db];
                coh[p] = (ep > 0.0)
                             ? map.rho_P_.coherence(e, ep, pr.dir_a, pr.dir_b)
                             : Complex(0.0);
            }
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    map.h_ls_ = build_lamb_shift(*map.eig_, map.rho_P_, &map.diag_, parallel);
    return map;
}

Matrix CollisionMap::dissipator(const Matrix& rho, bool parallel) const {
    const int n = dim();
    if (rho.rows() != n || rho.cols() != n)
        throw std::invalid_argument("CollisionMap: state dimension mismatch");
    const auto& grid = eig_->grid();
    const auto& deltas = eig_->deltas();
    const double tol = std::max(eig_->spec().bohr_tol(), 1e-300);
    const std::size_t g = grid.size();

    std::vector<Matrix> node_c(g);
#ifdef _OPENMP
#pragma omp parallel for schedule(static) if (parallel)
#endif
    for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(g); ++ii) {
        const auto i = static_cast<std::size_t>(ii);
        Matrix acc = Matrix::Zero(n, n);
        for (std::size_t p = 0; p < pairs_.size(); ++p) {
            const Complex c = node_coherence_[i][p];
            if (c == Complex(0.0)) continue;
            const auto& pr = pairs_[p];
            const bool same = pr.da == pr.db && pr.dir_a == pr.dir_b;
            const bool zero_shift = std::abs(shifts_[pr.shift]) <= tol;
            for (int dpp = 0; dpp < 2; ++dpp) {
                const Matrix& ta = eig_->at_node(i, pr.da, dpp, pr.dir_a);
                const Matrix& tb =
                    zero_shift
                        ? eig_->at_node(i, pr.db, dpp, pr.dir_b)
                        : node_tensors_[i][pr.shift]
                                       [(pr.db * 2 + static_cast<std::size_t>(dpp)) * 2 +
                                        static_cast<std::size_t>(pr.dir_b)];
                {
                    const Matrix gain = ta * rho * tb.adjoint();
                    const Matrix prod = tb.adjoint() * ta;
                    acc += c * (gain - 0.5 * (prod * rho + rho * prod));
                }
                if (!same) {  // mirror orientation keeps the sum Hermiticity-preserving
                    const Matrix gain = tb * rho * ta.adjoint();
                    const Matrix prod = ta.adjoint() * tb;
                    acc += std::conj(c) * (gain - 0.5 * (prod * rho + rho * prod));
                }
            }
        }
        node_c[i] = std::move(acc);
    }

    Matrix out = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < g; ++i) out += grid.weights[i] * node_c[i];
    return out;
}

Matrix CollisionMap::apply_linear(const Matrix& rho, bool parallel) const {
    const Matrix& h = h_ls_.matrix();
    return rho - kI * (h * rho - rho * h) + dissipator(rho, parallel);
}

DensityMatrix CollisionMap::apply(const DensityMatrix& rho) const {
    Matrix out = apply_linear(rho.matrix());
    try {
        return DensityMatrix(std::move(out), 1e-6, 1e-6, 1e-10);
    } catch (const std::invalid_argument& e) {
        throw std::runtime_error(std::string("CollisionMap::apply: map output invalid "
                                             "(quadrature failure): ") +
                                 e.what());
    }
}

ObservableChange CollisionMap::observable_changes(const DensityMatrix& rho,
                                                  const HermitianOperator& obs) const {
    const Matrix& a = obs.matrix();
    const Matrix& h = h_ls_.matrix();
    const Matrix& r = rho.matrix();
    const Complex ls = -kI * ((a * h - h * a) * r).trace();
    const Complex dd = (a * dissipator(r)).trace();
    if (std::abs(ls.imag()) > 1e-8 || std::abs(dd.imag()) > 1e-8)
        throw std::runtime_error("observable_changes: imaginary residue too large");
    return {ls.real(), dd.real(), ls.real() + dd.real()};
}

const Matrix& CollisionMap::superoperator() const {
    if (!superop_) {
        const int n = dim();
        auto sop = std::make_unique<Matrix>(n * n, n * n);
        for (int c = 0; c < n; ++c)
            for (int r = 0; r < n; ++r) {
                Matrix unit = Matrix::Zero(n, n);
                unit(r, c) = 1.0;
                const Matrix img = apply_linear(unit);
                for (int cc = 0; cc < n; ++cc)
                    for (int rr = 0; rr < n; ++rr)
                        (*sop)(cc * n + rr, c * n + r) = img(rr, cc);
            }
        superop_ = std::move(sop);
    }
    return *superop_;
}

Matrix CollisionMap::dissipator_superoperator() const {
    const int n = dim();
    Matrix sop(n * n, n * n);
    for (int c = 0; c < n; ++c)
        for (int r = 0; r < n; ++r) {
            Matrix unit = Matrix::Zero(n, n);
            unit(r, c) = 1.0;
            const Matrix img = dissipator(unit);
            for (int cc = 0; cc < n; ++cc)
                for (int rr = 0; rr < n; ++rr)
                    sop(cc * n + rr, c * n + r) = img(rr, cc);
        }
    return sop;
}

Matrix CollisionMap::choi() const {
    const int n = dim();
    Matrix choi = Matrix::Zero(n * n, n * n);
    for (int k = 0; k < n; ++k)
        for (int l = 0; l < n; ++l) {
            Matrix unit = Matrix::Zero(n, n);
            unit(k, l) = 1.0;
            const Matrix img = apply_linear(unit);
            choi.block(k * n, l * n, n, n) = img;
        }
    return choi;
}

HermitianOperator narrow_lamb_shift(const EigenOpTable& eig,
                                    const ParticleEnergyState& rho_P) {
    if (rho_P.kind() != ParticleKind::DiagonalEnsemble)
        throw std::invalid_argument("narrow_lamb_shift: diagonal ensemble required");
    const int n = eig.spec().dim();
    const auto& grid = eig.grid();
    const double tol = std::max(eig.spec().bohr_tol(), 1e-300);
    std::size_t zero = eig.deltas().size();
    for (std::size_t d = 0; d < eig.deltas().size(); ++d)
        if (std::abs(eig.deltas()[d]) <= tol) zero = d;
    Matrix y = Matrix::Zero(n, n);
    if (zero < eig.deltas().size()) {
        for (std::size_t i = 0; i < grid.size(); ++i)
            for (int d = 0; d < 2; ++d)
                y += grid.weights[i] * rho_P.diagonal(grid.nodes[i], d) *
                     eig.at_node(i, zero, d, d);
    }
    return HermitianOperator(0.5 * (y + y.adjoint().eval()));
}

Matrix narrow_dissipator(const EigenOpTable& eig, const ParticleEnergyState& rho_P,
                         const Matrix& rho) {
    if (rho_P.kind() != ParticleKind::DiagonalEnsemble)
        throw std::invalid_argument("narrow_dissipator: diagonal ensemble required");
    const int n = eig.spec().dim();
    const auto& grid = eig.grid();
    Matrix acc = Matrix::Zero(n, n);
    for (std::size_t i = 0; i < grid.size(); ++i) {
        for (int d = 0; d < 2; ++d) {
            const double w = rho_P.diagonal(grid.nodes[i], d);
            if (w == 0.0) continue;
            for (int dpp = 0; dpp < 2; ++dpp)
                for (std::size_t dd = 0; dd < eig.deltas().size(); ++dd) {
                    const Matrix& t = eig.at_node(i, dd, dpp, d);
                    const Matrix prod = t.adjoint() * t;
                    acc += grid.weights[i] * w *
                           (t * rho * t.adjoint() - 0.5 * (prod * rho + rho * prod));
                }
        }
    }
    return acc;
}

// ---------------------------------------------------------------------------
// Full-Hilbert-space oracle
// ---------------------------------------------------------------------------

namespace {

double approx_gcd(std::vector<double> values, double tol) {
    double g = 0.0;
    for (double v : values) {
        v = std::abs(v);
        if (v < tol) continue;
        if (g == 0.0) {
            g = v;
            continue;
        }
        double a = std::max(g, v), b = std::min(g, v);
        while (b > tol) {
            double r = std::fmod(a, b);
            if (r > b - tol) r = 0.0;  // a is a near-multiple of b
            a = b;
            b = r;
        }
        g = a;
    }
    return g;
}

}  // namespace

OracleResult full_space_oracle(const SystemSpec& spec, const PotentialSpec& pot,
                               const DensityMatrix& rho_S, const ParticleEnergyState& rho_P,
                               const OracleOptions& opt) {
    spec.validate();
    const int n = spec.dim();
    if (rho_S.dim() != n) throw std::invalid_argument("full_space_oracle: dimension mismatch");

    const double e_lo = rho_P.grid().lo();
    const double e_hi = rho_P.grid().hi();
    const double span = e_hi - e_lo;

    std::vector<double> gaps;
    for (double d : bohr_frequencies(spec))
        if (d > spec.bohr_tol()) gaps.push_back(d);
    double h;
    if (gaps.empty()) {
        h = span / static_cast<double>(opt.nodes - 1);
    } else {
        const double g0 = approx_gcd(gaps, 1e-9 * gaps.back());
        if (g0 < 1e-6 * gaps.back())
            throw std::invalid_argument(
                "full_space_oracle: level spacings are incommensurate; no uniform grid "
                "regularizes the energy delta");
        const double k = std::ceil(g0 * static_cast<double>(opt.nodes - 1) / span);
        h = g0 / k;
    }
    auto grid_size = static_cast<std::size_t>(std::floor(span / h)) + 1;
    if (grid_size > opt.max_nodes)
        throw std::invalid_argument("full_space_oracle: grid of " +
                                    std::to_string(grid_size) + " nodes exceeds the guard");

    // keep every shell energy clear of channel thresholds
    double e_start = e_lo;
    const auto deltas = bohr_frequencies(spec);
    for (int attempt = 0; attempt < 16; ++attempt) {
        bool clash = false;
        for (double d : deltas) {
            const double rel = (d - e_start) / h;
            const double frac = std::abs(rel - std::round(rel));
            if (d > e_start - h && d < e_start + (static_cast<double>(grid_size) + 1.0) * h &&
                frac * h < 4.0 * kThresholdEps)
                clash = true;
        }
        if (!clash) break;
        e_start += 16.0 * kThresholdEps;
    }

    std::vector<long> offsets(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        const double rel = (spec.energies[j] - spec.energies[0]) / h;
        offsets[static_cast<std::size_t>(j)] = std::lround(rel);
        if (std::abs(rel - std::round(rel)) > 1e-6)
            throw std::invalid_argument("full_space_oracle: level offsets not commensurate "
                                        "with the grid step");
    }
    const long o_max = *std::max_element(offsets.begin(), offsets.end());
    const auto g = static_cast<long>(grid_size);
    const long n_shells = g + o_max;

    std::vector<double> nodes(grid_size);
    for (std::size_t i = 0; i < grid_size; ++i)
        nodes[i] = e_start + h * static_cast<double>(i);

    // solve each total-energy shell once
    std::vector<Matrix> shell_s(static_cast<std::size_t>(n_shells));
    std::vector<std::vector<int>> shell_open(static_cast<std::size_t>(n_shells));
    std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (opt.parallel)
#endif
    for (long m = 0; m < n_shells; ++m) {
        try {
            const double e_tot = e_start + h * static_cast<double>(m) + spec.energies[0];
            const SMatrixBlock block = solve_smatrix(spec, pot, e_tot);
            shell_s[static_cast<std::size_t>(m)] = block.s;
            shell_open[static_cast<std::size_t>(m)] = block.open;
        } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);

    Eigen::SelfAdjointEigenSolver<Matrix> es(rho_S.matrix());
    const RealVector lambda = es.eigenvalues();
    const Matrix chi = es.eigenvectors();

    Matrix rho_out = Matrix::Zero(n, n);
    double leaked = 0.0;

    const auto scatter_shell = [&](long m, std::vector<Complex>& v, double& leak_acc) {
        // v indexed (j*2 + d)*grid_size + i
        const auto& open = shell_open[static_cast<std::size_t>(m)];
        const auto& s = shell_s[static_cast<std::size_t>(m)];
        const int no = static_cast<int>(open.size());
        std::vector<Complex> in(static_cast<std::size_t>(2 * no), Complex(0.0));
        std::vector<long> row(static_cast<std::size_t>(no));
        bool any = false;
        for (int oi = 0; oi < no; ++oi) {
            const int j = open[oi];
            const long i = m - offsets[static_cast<std::size_t>(j)];
            row[static_cast<std::size_t>(oi)] = i;
            if (i < 0 || i >= g) continue;
            for (int d = 0; d < 2; ++d) {
                const Complex a =
                    v[(static_cast<std::size_t>(j) * 2 + static_cast<std::size_t>(d)) *
                          grid_size +
                      static_cast<std::size_t>(i)];
                in[static_cast<std::size_t>(d * no + oi)] = a;
                if (a != Complex(0.0)) any = true;
            }
        }
        if (!any) return;
        for (int oo = 0; oo < no; ++oo) {
            const long ip = row[static_cast<std::size_t>(oo)];
            for (int dp = 0; dp < 2; ++dp) {
                Complex out = 0.0;
                for (int k = 0; k < 2 * no; ++k)
                    out += s(dp * no + oo, k) * in[static_cast<std::size_t>(k)];
                if (ip < 0 || ip >= g) {
                    leak_acc += std::norm(out);
                } else {
                    v[(static_cast<std::size_t>(open[oo]) * 2 +
                       static_cast<std::size_t>(dp)) *
                          grid_size +
                      static_cast<std::size_t>(ip)] = out;
                }
            }
        }
    };

    if (rho_P.kind() == ParticleKind::PureWavepacket) {
        std::vector<Complex> psi(2 * grid_size);
        double nrm2 = 0.0;
        for (std::size_t i = 0; i < grid_size; ++i)
            for (int d = 0; d < 2; ++d) {
                const Complex a = std::sqrt(h) * rho_P.amplitude(nodes[i], d);
                psi[static_cast<std::size_t>(d) * grid_size + i] = a;
                nrm2 += std::norm(a);
            }
        const double scale = 1.0 / std::sqrt(nrm2);
        for (auto& a : psi) a *= scale;

        for (int sidx = 0; sidx < n; ++sidx) {
            if (lambda(sidx) < 1e-14) continue;
            std::vector<Complex> v(static_cast<std::size_t>(n) * 2 * grid_size,
                                   Complex(0.0));
            for (int j = 0; j < n; ++j)
                for (int d = 0; d < 2; ++d)
                    for (std::size_t i = 0; i < grid_size; ++i)
                        v[(static_cast<std::size_t>(j) * 2 + static_cast<std::size_t>(d)) *
                              grid_size +
                          i] = chi(j, sidx) * psi[static_cast<std::size_t>(d) * grid_size + i];
            double leak_local = 0.0;
            for (long m = 0; m < n_shells; ++m) scatter_shell(m, v, leak_local);
            leaked += lambda(sidx) * leak_local;
            for (int jp = 0; jp < n; ++jp)
                for (int j = 0; j < n; ++j) {
                    Complex acc = 0.0;
                    for (int d = 0; d < 2; ++d)
                        for (std::size_t i = 0; i < grid_size; ++i)
                            acc += v[(static_cast<std::size_t>(jp) * 2 +
                                      static_cast<std::size_t>(d)) *
                                         grid_size +
                                     i] *
                                   std::conj(v[(static_cast<std::size_t>(j) * 2 +
                                                static_cast<std::size_t>(d)) *
                                                   grid_size +
                                               i]);
                    rho_out(jp, j) += lambda(sidx) * acc;
                }
        }
    } else {
        // mixture of sharp energy-direction states; each touches <= n shells,
        // so the out-state is kept sparse
        double total_w = 0.0;
        for (std::size_t i = 0; i < grid_size; ++i)
            for (int d = 0; d < 2; ++d) total_w += h * rho_P.diagonal(nodes[i], d);
        for (std::size_t i = 0; i < grid_size; ++i) {
            for (int d = 0; d < 2; ++d) {
                const double p = h * rho_P.diagonal(nodes[i], d) / total_w;
                if (p == 0.0) continue;
                std::vector<long> shells;
                for (int j = 0; j < n; ++j) {
                    const long m = static_cast<long>(i) + offsets[static_cast<std::size_t>(j)];
                    if (std::find(shells.begin(), shells.end(), m) == shells.end())
                        shells.push_back(m);
                }
                for (int sidx = 0; sidx < n; ++sidx) {
                    if (lambda(sidx) < 1e-14) continue;
                    // out amplitudes grouped by particle label (dir, node)
                    std::vector<std::pair<std::pair<int, long>, Vector>> out;
                    for (long m : shells) {
                        const auto& open = shell_open[static_cast<std::size_t>(m)];
                        const auto& s = shell_s[static_cast<std::size_t>(m)];
                        const int no = static_cast<int>(open.size());
                        std::vector<Complex> in(static_cast<std::size_t>(2 * no),
                                                Complex(0.0));
                        bool any = false;
                        for (int oi = 0; oi < no; ++oi) {
                            const int j = open[oi];
                            if (static_cast<long>(i) +
                                    offsets[static_cast<std::size_t>(j)] !=
                                m)
                                continue;
                            in[static_cast<std::size_t>(d * no + oi)] = chi(j, sidx);
                            any = true;
                        }
                        if (!any) continue;
                        for (int oo = 0; oo < no; ++oo) {
                            const long ip = m - offsets[static_cast<std::size_t>(open[oo])];
                            for (int dp = 0; dp < 2; ++dp) {
                                Complex amp = 0.0;
                                for (int k = 0; k < 2 * no; ++k)
                                    amp += s(dp * no + oo, k) * in[static_cast<std::size_t>(k)];
                                if (amp == Complex(0.0)) continue;
                                if (ip < 0 || ip >= g) {
                                    leaked += p * lambda(sidx) * std::norm(amp);
                                    continue;
                                }
                                Vector* slot = nullptr;
                                for (auto& kv : out)
                                    if (kv.first == std::make_pair(dp, ip)) slot = &kv.second;
                                if (slot == nullptr) {
                                    out.emplace_back(std::make_pair(dp, ip),
                                                     Vector::Zero(n));
                                    slot = &out.back().second;
                                }
                                (*slot)(open[oo]) += amp;
                            }
                        }
                    }
                    for (const auto& kv : out)
                        rho_out += lambda(sidx) * p *
                                   (kv.second * kv.second.adjoint());
                }
            }
        }
    }

    OracleResult res;
    res.rho = std::move(rho_out);
    res.leaked = leaked;
    res.grid_size = grid_size;
    return res;
}

}  // namespace qscat
