// potential.hpp — piecewise-constant matrix potentials of finite extent,
// described both as a tensor decomposition sum_l V_S^l (x) profile^l(x) and
// as the merged list of constant-coupling segments derived from it.

#pragma once

#include "qscat/operators.hpp"

#include <vector>

namespace qscat {

struct BoxProfile {
    double x_left = 0.0;
    double x_right = 0.0;
    double value = 0.0;
};

struct PotentialTerm {
    Matrix system_op;                 // Hermitian V_S^l
    std::vector<BoxProfile> profile;  // non-overlapping boxcars (V_P^l diagonal in x)

    double eval_profile(double x) const;
};

struct PotentialSegment {
    double x_left = 0.0;
    double x_right = 0.0;
    Matrix coupling;  // W = sum_l V_S^l * profile^l on this interval
};

struct PotentialSpec {
    double mass = 1.0;
    std::vector<PotentialTerm> terms;
    std::vector<PotentialSegment> segments;  // derived, sorted, non-overlapping

    bool empty() const { return segments.empty(); }
    double x_min() const { return segments.empty() ? 0.0 : segments.front().x_left; }
    double x_max() const { return segments.empty() ? 0.0 : segments.back().x_right; }

    // Checks Hermiticity, ordering and that the decomposition reproduces the
    // segment couplings entrywise.
    void validate(int dim) const;

    static PotentialSpec from_terms(double mass, std::vector<PotentialTerm> terms, int dim);

    // Same potential with every profile value multiplied by `factor`.
    PotentialSpec scaled(double factor) const;
};

// Single boxcar coupling matrix * V0 on [x_left, x_right].
PotentialSpec barrier_potential(double mass, const Matrix& system_op, double v0,
                                double x_left, double x_right);

}  // namespace qscat
