#include "qscat/channel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace qscat {

namespace {

// One scattering element in its own local mode basis: amplitudes referenced
// at the element boundaries. All blocks are N x N.
struct ScatterBlocks {
    Matrix r, t, rp, tp;

    static ScatterBlocks identity(int n) {
        ScatterBlocks s;
        s.r = Matrix::Zero(n, n);
        s.rp = Matrix::Zero(n, n);
        s.t = Matrix::Identity(n, n);
        s.tp = Matrix::Identity(n, n);
        return s;
    }
};

// Redheffer star product: `a` physically to the left of `b`.
ScatterBlocks star(const ScatterBlocks& a, const ScatterBlocks& b) {
    const int n = static_cast<int>(a.r.rows());
    const Matrix eye = Matrix::Identity(n, n);
    Eigen::PartialPivLU<Matrix> lu1(eye - a.rp * b.r);
    Eigen::PartialPivLU<Matrix> lu2(eye - b.r * a.rp);
    const Matrix m1ta = lu1.solve(a.t);
    const Matrix m1rp = lu1.solve(a.rp);
    const Matrix m2tp = lu2.solve(b.tp);
    ScatterBlocks out;
    out.t = b.t * m1ta;
    out.r = a.r + a.tp * b.r * m1ta;
    out.rp = b.rp + b.t * m1rp * b.tp;
    out.tp = a.tp * m2tp;
    return out;
}

struct Region {
    Matrix u;       // eigenvectors of H_S + W (identity in free regions)
    Vector k;       // mode wavenumbers, real > 0 or positive imaginary
    double length;  // 0 for the asymptotic regions
};

Vector wavenumbers(const RealVector& mu, double e_total, double mass, double hbar) {
    Vector k(mu.size());
    for (int i = 0; i < mu.size(); ++i) {
        const double x = 2.0 * mass * (e_total - mu(i));
        k(i) = (x >= 0.0) ? Complex(std::sqrt(x) / hbar, 0.0)
                          : Complex(0.0, std::sqrt(-x) / hbar);
    }
    return k;
}

// Interface between two regions with amplitudes referenced at the interface:
// continuity of psi and psi' in the local eigenbases.
ScatterBlocks interface_blocks(const Region& left, const Region& right, int seg_index) {
    const int n = static_cast<int>(left.u.rows());
    Matrix m(2 * n, 2 * n), rhs(2 * n, 2 * n);
    const Matrix ulk = left.u * left.k.asDiagonal();
    const Matrix urk = right.u * right.k.asDiagonal();
    m.block(0, 0, n, n) = -left.u;
    m.block(0, n, n, n) = right.u;
    m.block(n, 0, n, n) = ulk;
    m.block(n, n, n, n) = urk;
    rhs.block(0, 0, n, n) = left.u;
    rhs.block(0, n, n, n) = -right.u;
    rhs.block(n, 0, n, n) = ulk;
    rhs.block(n, n, n, n) = urk;
    Eigen::PartialPivLU<Matrix> lu(m);
    const Matrix x = lu.solve(rhs);
    if (!x.allFinite()) {
        std::ostringstream msg;
        msg << "solve_smatrix: singular interface system at segment " << seg_index;
        throw SolverError(msg.str());
    }
    ScatterBlocks s;
    s.r = x.block(0, 0, n, n);
    s.tp = x.block(0, n, n, n);
    s.t = x.block(n, 0, n, n);
    s.rp = x.block(n, n, n, n);
    return s;
}

ScatterBlocks layer_blocks(const Region& region) {
    const int n = static_cast<int>(region.u.rows());
    ScatterBlocks s = ScatterBlocks::identity(n);
    Vector prop(n);
    for (int i = 0; i < n; ++i) prop(i) = std::exp(kI * region.k(i) * region.length);
    s.t = prop.asDiagonal();
    s.tp = prop.asDiagonal();
    return s;
}

}  // namespace

bool SMatrixBlock::is_open(int j) const { return open_index(j) >= 0; }

int SMatrixBlock::open_index(int j) const {
    for (std::size_t i = 0; i < open.size(); ++i)
        if (open[i] == j) return static_cast<int>(i);
    return -1;
}

Complex SMatrixBlock::s_entry(int dir_out, int j_out, int dir_in, int j_in) const {
    const int io = open_index(j_out);
    const int ii = open_index(j_in);
    if (io < 0 || ii < 0) throw std::out_of_range("SMatrixBlock: closed channel");
    return s(dir_out * n_open() + io, dir_in * n_open() + ii);
}

Complex SMatrixBlock::t_entry(int dir_out, int j_out, int dir_in, int j_in) const {
    const Complex delta = (dir_out == dir_in && j_out == j_in) ? 1.0 : 0.0;
    return kI * (s_entry(dir_out, j_out, dir_in, j_in) - delta);
}

Matrix SMatrixBlock::t_full() const {
    Matrix out = Matrix::Zero(2 * dim, 2 * dim);
    for (int dp = 0; dp < 2; ++dp)
        for (int d = 0; d < 2; ++d)
            for (int io = 0; io < n_open(); ++io)
                for (int ii = 0; ii < n_open(); ++ii)
                    out(dp * dim + open[io], d * dim + open[ii]) =
                        t_entry(dp, open[io], d, open[ii]);
    return out;
}

SMatrixBlock solve_smatrix(const SystemSpec& spec, const PotentialSpec& pot, double E) {
    spec.validate();
    const int n = spec.dim();
    if (!(E > spec.energies.front()))
        throw std::invalid_argument("solve_smatrix: no open channel at this energy");
    for (int j = 0; j < n; ++j)
        if (std::abs(E - spec.energies[j]) < kThresholdEps) {
            std::ostringstream msg;
            msg << "solve_smatrix: energy " << E << " at channel threshold j=" << j;
            throw ThresholdError(msg.str());
        }

    SMatrixBlock block;
    block.energy = E;
    block.dim = n;
    for (int j = 0; j < n; ++j)
        if (E - spec.energies[j] > 0.0) block.open.push_back(j);
    const int n_open = static_cast<int>(block.open.size());

    const RealVector free_mu =
        Eigen::Map<const RealVector>(spec.energies.data(), n);
    const Vector free_k = wavenumbers(free_mu, E, pot.mass, spec.hbar);

    ScatterBlocks total = ScatterBlocks::identity(n);
    double x_left = 0.0, x_right = 0.0;

    if (!pot.segments.empty()) {
        x_left = pot.x_min();
        x_right = pot.x_max();

        Region free_region{Matrix::Identity(n, n), free_k, 0.0};
        std::vector<Region> regions;
        regions.push_back(free_region);
        double cursor = x_left;
        for (std::size_t i = 0; i < pot.segments.size(); ++i) {
            const auto& seg = pot.segments[i];
            if (seg.x_left > cursor + 1e-14) {  // gap -> free layer
                Region gap = free_region;
                gap.length = seg.x_left - cursor;
                regions.push_back(gap);
            }
            Eigen::SelfAdjointEigenSolver<Matrix> es(spec.hamiltonian() + seg.coupling);
            if (es.info() != Eigen::Success)
                throw SolverError("solve_smatrix: eigensolver failed in segment " +
                                  std::to_string(i));
            Region r;
            r.u = es.eigenvectors();
            r.k = wavenumbers(es.eigenvalues(), E, pot.mass, spec.hbar);
            for (int q = 0; q < n; ++q)
                if (std::abs(r.k(q)) * spec.hbar < kThresholdEps * pot.mass) {
                    std::ostringstream msg;
                    msg << "solve_smatrix: grazing mode (k ~ 0) in segment " << i;
                    throw SolverError(msg.str());
                }
            r.length = seg.x_right - seg.x_left;
            regions.push_back(r);
            cursor = seg.x_right;
        }
        regions.push_back(free_region);

        total = interface_blocks(regions[0], regions[1], 0);
        for (std::size_t i = 1; i + 1 < regions.size(); ++i) {
            total = star(total, layer_blocks(regions[i]));
            total = star(total, interface_blocks(regions[i], regions[i + 1],
                                                 static_cast<int>(i)));
        }
    }

    // Re-reference amplitudes to plane waves e^{ipx/hbar} at the origin and
    // flux-normalize; both are diagonal unitary operations on open channels.
    block.s = Matrix::Zero(2 * n_open, 2 * n_open);
    for (int io = 0; io < n_open; ++io) {
        for (int ii = 0; ii < n_open; ++ii) {
            const int jo = block.open[io];
            const int ji = block.open[ii];
            const double ko = free_k(jo).real();
            const double ki = free_k(ji).real();
            const double flux = std::sqrt(ko / ki);
            const Complex pho_l = std::exp(kI * Complex(ko * x_left));
            const Complex phi_l = std::exp(kI * Complex(ki * x_left));
            const Complex pho_r = std::exp(-kI * Complex(ko * x_right));
            const Complex phi_r = std::exp(-kI * Complex(ki * x_right));
            // (+ <- +): transmission left to right
            block.s(kPlus * n_open + io, kPlus * n_open + ii) =
                flux * pho_r * total.t(jo, ji) * phi_l;
            // (- <- +): reflection back to the left
            block.s(kMinus * n_open + io, kPlus * n_open + ii) =
                flux * pho_l * total.r(jo, ji) * phi_l;
            // (+ <- -): reflection back to the right
            block.s(kPlus * n_open + io, kMinus * n_open + ii) =
                flux * pho_r * total.rp(jo, ji) * phi_r;
            // (- <- -): transmission right to left
            block.s(kMinus * n_open + io, kMinus * n_open + ii) =
                flux * pho_l * total.tp(jo, ji) * phi_r;
        }
    }
    if (!block.s.allFinite())
        throw SolverError("solve_smatrix: non-finite scattering matrix");
    return block;
}

double UnitarityReport::max() const {
    return std::max({max_dev_left, max_dev_right, max_prob_dev});
}

UnitarityReport verify_unitarity(const SMatrixBlock& block) {
    const int m = static_cast<int>(block.s.rows());
    const Matrix eye = Matrix::Identity(m, m);
    UnitarityReport rep;
    rep.max_dev_left = max_abs(block.s.adjoint() * block.s - eye);
    rep.max_dev_right = max_abs(block.s * block.s.adjoint() - eye);
    for (int c = 0; c < m; ++c) {
        double col = 0.0, row = 0.0;
        for (int r = 0; r < m; ++r) {
            col += std::norm(block.s(r, c));
            row += std::norm(block.s(c, r));
        }
        rep.max_prob_dev = std::max({rep.max_prob_dev, std::abs(col - 1.0), std::abs(row - 1.0)});
    }
    return rep;
}

OpticalReport verify_optical_theorem(const SMatrixBlock& block) {
    const int m = static_cast<int>(block.s.rows());
    const Matrix t = kI * (block.s - Matrix::Identity(m, m));
    OpticalReport rep;
    rep.max_identity_dev = max_abs(kI * (t - t.adjoint().eval()) - Matrix(t.adjoint() * t));
    rep.max_im_forward = -1.0;
    for (int c = 0; c < m; ++c) {
        double sigma = 0.0;
        for (int r = 0; r < m; ++r) sigma += std::norm(t(r, c));
        rep.max_im_forward = std::max(rep.max_im_forward, t(c, c).imag());
        rep.max_forward_dev = std::max(rep.max_forward_dev, std::abs(t(c, c).imag() + 0.5 * sigma));
    }
    // Gram matrix per incoming direction: sigma^a = T^dag T restricted
    rep.min_sigma_eig = 0.0;
    const int no = block.n_open();
    for (int d = 0; d < 2; ++d) {
        const Matrix cols = t.block(0, d * no, m, no);
        Eigen::SelfAdjointEigenSolver<Matrix> es(Matrix(cols.adjoint() * cols),
                                                 Eigen::EigenvaluesOnly);
        rep.min_sigma_eig = std::min(rep.min_sigma_eig, es.eigenvalues().minCoeff());
    }
    return rep;
}

Complex born_amplitude(const SystemSpec& spec, const PotentialSpec& pot, int j, int dir,
                       int j_out, int dir_out, double Ep) {
    const int n = spec.dim();
    if (j < 0 || j >= n || j_out < 0 || j_out >= n)
        throw std::invalid_argument("born_amplitude: channel index out of range");
    if (!(Ep > 0.0)) throw std::invalid_argument("born_amplitude: Ep must be > 0");
    const double e_out = Ep + spec.energies[j] - spec.energies[j_out];
    if (!(e_out > 0.0))
        throw std::invalid_argument("born_amplitude: outgoing channel closed");
    const double hbar = spec.hbar;
    const double p = std::sqrt(2.0 * pot.mass * Ep);
    const double pp = std::sqrt(2.0 * pot.mass * e_out);
    const double p_in = (dir == kPlus) ? p : -p;
    const double p_out = (dir_out == kPlus) ? pp : -pp;
    const double q = p_in - p_out;
    Complex acc = 0.0;
    for (const auto& seg : pot.segments) {
        const Complex w = seg.coupling(j_out, j);
        if (w == Complex(0.0)) continue;
        const double len = seg.x_right - seg.x_left;
        const double mid = 0.5 * (seg.x_left + seg.x_right);
        Complex overlap;
        if (q == 0.0) {
            overlap = len;
        } else {
            overlap = (2.0 * hbar / q) * std::sin(q * len / (2.0 * hbar)) *
                      std::exp(kI * Complex(q * mid / hbar));
        }
        acc += w * overlap;
    }
    return acc * pot.mass / (hbar * std::sqrt(p * pp));
}

double nudge_off_thresholds(double e_total, const std::vector<double>& thresholds,
                            double width) {
    for (double th : thresholds) {
        const double d = e_total - th;
        if (std::abs(d) < width) return (d >= 0.0) ? th + width : th - width;
    }
    return e_total;
}

ExactAmplitudes::ExactAmplitudes(SystemSpec spec, PotentialSpec pot)
    : spec_(std::move(spec)), pot_(std::move(pot)) {}

Matrix ExactAmplitudes::t_full(double E_total) const {
    const double e = nudge_off_thresholds(E_total, spec_.energies);
    if (!(e > spec_.energies.front())) return Matrix::Zero(2 * spec_.dim(), 2 * spec_.dim());
    return solve_smatrix(spec_, pot_, e).t_full();
}

BornAmplitudes::BornAmplitudes(SystemSpec spec, PotentialSpec pot)
    : spec_(std::move(spec)), pot_(std::move(pot)) {}

Matrix BornAmplitudes::t_full(double E_total) const {
    const int n = spec_.dim();
    const double e = nudge_off_thresholds(E_total, spec_.energies);
    Matrix out = Matrix::Zero(2 * n, 2 * n);
    for (int j = 0; j < n; ++j) {
        const double ep = e - spec_.energies[j];
        if (!(ep > 0.0)) continue;
        for (int jo = 0; jo < n; ++jo) {
            if (!(e - spec_.energies[jo] > 0.0)) continue;
            for (int d = 0; d < 2; ++d)
                for (int dp = 0; dp < 2; ++dp)
                    out(dp * n + jo, d * n + j) = born_amplitude(spec_, pot_, j, d, jo, dp, ep);
        }
    }
    return out;
}

SMatrixTable SMatrixTable::build(const SystemSpec& spec, const PotentialSpec& pot, double e_lo,
                                 double e_hi, std::size_t nodes, bool parallel) {
    spec.validate();
    if (!(e_hi > e_lo)) throw std::invalid_argument("SMatrixTable: bad energy range");
    SMatrixTable table;
    table.dim_ = spec.dim();
    table.lo_ = e_lo;
    table.hi_ = e_hi;
    table.e_min_sys_ = spec.energies.front();

    // split at channel thresholds so interpolation never crosses a branch point
    std::vector<double> cuts{e_lo};
    std::vector<double> distinct;
    for (double e : spec.energies)
        if (distinct.empty() || e - distinct.back() > kThresholdEps) distinct.push_back(e);
    for (double th : distinct)
        if (th > e_lo + kThresholdEps && th < e_hi - kThresholdEps) cuts.push_back(th);
    cuts.push_back(e_hi);
    std::sort(cuts.begin(), cuts.end());

    const double total_len = e_hi - e_lo;
    for (std::size_t c = 0; c + 1 < cuts.size(); ++c) {
        const double margin = 2.0 * kThresholdEps;
        const double a = cuts[c] + ((c == 0) ? 0.0 : margin);
        const double b = cuts[c + 1] - ((c + 2 == cuts.size()) ? 0.0 : margin);
        if (!(b > a + 4.0 * kThresholdEps)) continue;
        if (!(b > spec.energies.front())) continue;  // nothing open below the first level
        auto count = static_cast<std::size_t>(
            std::max<double>(8.0, std::ceil(static_cast<double>(nodes) * (b - a) / total_len)));
        Interval iv;
        iv.nodes.resize(count);
        for (std::size_t i = 0; i < count; ++i)
            iv.nodes[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(count - 1);
        for (auto& e : iv.nodes) e = nudge_off_thresholds(e, spec.energies);

        const int m = 2 * table.dim_;
        iv.entries.assign(static_cast<std::size_t>(m) * m,
                          std::vector<Complex>(count, Complex(0.0)));
        std::vector<Matrix> mats(count);
        std::exception_ptr err;
#ifdef _OPENMP
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
        for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(count); ++i) {
            try {
                mats[static_cast<std::size_t>(i)] =
                    solve_smatrix(spec, pot, iv.nodes[static_cast<std::size_t>(i)]).t_full();
            } catch (...) {
#ifdef _OPENMP
#pragma omp critical
#endif
                if (!err) err = std::current_exception();
            }
        }
        if (err) std::rethrow_exception(err);
        for (std::size_t i = 0; i < count; ++i)
            for (int r = 0; r < m; ++r)
                for (int cc = 0; cc < m; ++cc)
                    iv.entries[static_cast<std::size_t>(r) * m + cc][i] = mats[i](r, cc);
        table.intervals_.push_back(std::move(iv));
    }
    if (table.intervals_.empty())
        throw std::invalid_argument("SMatrixTable: energy range contains no usable interval");
    return table;
}

std::size_t SMatrixTable::node_count() const {
    std::size_t n = 0;
    for (const auto& iv : intervals_) n += iv.nodes.size();
    return n;
}

Matrix SMatrixTable::t_full(double E_total) const {
    const Interval* hit = nullptr;
    for (const auto& iv : intervals_) {
        if (E_total >= iv.nodes.front() && E_total <= iv.nodes.back()) {
            hit = &iv;
            break;
        }
    }
    if (hit == nullptr) {
        // tolerate queries a rounding error or a threshold-margin away from
        // an interval edge by clamping onto it
        const double tol = std::max(8.0 * kThresholdEps, 1e-12 * std::abs(E_total));
        for (const auto& iv : intervals_) {
            if (E_total >= iv.nodes.front() - tol && E_total <= iv.nodes.back() + tol) {
                hit = &iv;
                E_total = std::clamp(E_total, iv.nodes.front(), iv.nodes.back());
                break;
            }
        }
    }
    if (hit == nullptr) {
        // below the lowest level nothing is open; such queries are all-closed
        if (E_total <= e_min_sys_ + kThresholdEps)
            return Matrix::Zero(2 * dim_, 2 * dim_);
        std::ostringstream msg;
        msg << "SMatrixTable: energy " << E_total << " outside tabulated coverage ["
            << lo_ << ", " << hi_ << "] (threshold gaps excluded)";
        throw std::out_of_range(msg.str());
    }
    const int m = 2 * dim_;
    Matrix out(m, m);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c)
            out(r, c) = interp_cubic(std::span<const double>(hit->nodes),
                                     std::span<const Complex>(
                                         hit->entries[static_cast<std::size_t>(r) * m + c]),
                                     E_total);
    return out;
}

}  // namespace qscat
