#include "qscat/potential.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace qscat {

double PotentialTerm::eval_profile(double x) const {
    for (const auto& b : profile)
        if (x >= b.x_left && x < b.x_right) return b.value;
    return 0.0;
}

namespace {

void check_hermitian(const Matrix& m, int dim, const char* what) {
    if (m.rows() != dim || m.cols() != dim)
        throw std::invalid_argument(std::string(what) + ": dimension mismatch");
    if (max_abs(m - m.adjoint().eval()) > 1e-12 * std::max(1.0, max_abs(m)))
        throw std::invalid_argument(std::string(what) + ": matrix is not Hermitian");
}

}  // namespace

void PotentialSpec::validate(int dim) const {
    if (!(mass > 0.0)) throw std::invalid_argument("PotentialSpec: mass must be > 0");
    for (const auto& t : terms) {
        check_hermitian(t.system_op, dim, "PotentialSpec term");
        std::vector<BoxProfile> sorted = t.profile;
        std::sort(sorted.begin(), sorted.end(),
                  [](const BoxProfile& a, const BoxProfile& b) { return a.x_left < b.x_left; });
        for (std::size_t i = 0; i < sorted.size(); ++i) {
            if (!(sorted[i].x_right > sorted[i].x_left))
                throw std::invalid_argument("PotentialSpec: empty profile interval");
            if (!std::isfinite(sorted[i].x_left) || !std::isfinite(sorted[i].x_right))
                throw std::invalid_argument("PotentialSpec: profile must have finite extent");
            if (i > 0 && sorted[i].x_left < sorted[i - 1].x_right - 1e-14)
                throw std::invalid_argument("PotentialSpec: overlapping boxcars in one term");
        }
    }
    for (std::size_t i = 0; i < segments.size(); ++i) {
        check_hermitian(segments[i].coupling, dim, "PotentialSpec segment");
        if (!(segments[i].x_right > segments[i].x_left))
            throw std::invalid_argument("PotentialSpec: empty segment");
        if (i > 0 && segments[i].x_left < segments[i - 1].x_right - 1e-14)
            throw std::invalid_argument("PotentialSpec: overlapping segments");
    }
    // the decomposition must reproduce the segments exactly
    for (const auto& seg : segments) {
        const double x_mid = 0.5 * (seg.x_left + seg.x_right);
        Matrix sum = Matrix::Zero(dim, dim);
        for (const auto& t : terms) sum += t.system_op * t.eval_profile(x_mid);
        if (max_abs(sum - seg.coupling) > 1e-12 * std::max(1.0, max_abs(seg.coupling)))
            throw std::invalid_argument(
                "PotentialSpec: decomposition does not reconstruct segment coupling");
    }
}

PotentialSpec PotentialSpec::from_terms(double mass, std::vector<PotentialTerm> terms, int dim) {
    PotentialSpec spec;
    spec.mass = mass;
    spec.terms = std::move(terms);

    std::set<double> cuts;
    for (const auto& t : spec.terms)
        for (const auto& b : t.profile) {
            cuts.insert(b.x_left);
            cuts.insert(b.x_right);
        }
    std::vector<double> xs(cuts.begin(), cuts.end());
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        const double xl = xs[i], xr = xs[i + 1];
        const double x_mid = 0.5 * (xl + xr);
        Matrix w = Matrix::Zero(dim, dim);
        for (const auto& t : spec.terms) w += t.system_op * t.eval_profile(x_mid);
        if (max_abs(w) > 0.0) spec.segments.push_back({xl, xr, std::move(w)});
    }
    spec.validate(dim);
    return spec;
}

PotentialSpec PotentialSpec::scaled(double factor) const {
    PotentialSpec out = *this;
    for (auto& t : out.terms)
        for (auto& b : t.profile) b.value *= factor;
    for (auto& s : out.segments) s.coupling *= factor;
    return out;
}

PotentialSpec barrier_potential(double mass, const Matrix& system_op, double v0,
                                double x_left, double x_right) {
    PotentialTerm term;
    term.system_op = system_op;
    term.profile = {{x_left, x_right, v0}};
    return PotentialSpec::from_terms(mass, {std::move(term)},
                                     static_cast<int>(system_op.rows()));
}

}  // namespace qscat
