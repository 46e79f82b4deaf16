// grid.hpp — shared energy grids with trapezoid weights, plus local cubic
// interpolation used for off-grid amplitude and wavefunction lookups.

#pragma once

#include "qscat/operators.hpp"

#include <span>
#include <vector>

namespace qscat {

struct EnergyGrid {
    std::vector<double> nodes;    // strictly increasing
    std::vector<double> weights;  // trapezoid weights for integration dE

    std::size_t size() const { return nodes.size(); }
    double lo() const { return nodes.front(); }
    double hi() const { return nodes.back(); }
    bool contains(double x) const { return x >= lo() && x <= hi(); }

    // Index of the cell [nodes[i], nodes[i+1]] containing x (clamped).
    std::size_t cell(double x) const;

    static EnergyGrid from_nodes(std::vector<double> nodes);
    static EnergyGrid uniform(double a, double b, std::size_t n);

    // Nodes at E = p^2/2m for p uniform on [p_lo, p_hi]; weights are still
    // trapezoid in E. Momentum spacing keeps 1/sqrt(E) integrands smooth.
    static EnergyGrid momentum_uniform(double mass, double p_lo, double p_hi,
                                       std::size_t n);
};

// Four-point Lagrange interpolation on a strictly increasing abscissa.
// Degrades to the available stencil near the edges. x outside the range
// throws; callers with a zero-extension policy must test first.
double interp_cubic(std::span<const double> xs, std::span<const double> ys, double x);
Complex interp_cubic(std::span<const double> xs, std::span<const Complex> ys, double x);

}  // namespace qscat
