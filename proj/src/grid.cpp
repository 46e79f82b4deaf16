#include "qscat/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace qscat {

namespace {

std::vector<double> trapezoid_weights(const std::vector<double>& nodes) {
    const std::size_t n = nodes.size();
    std::vector<double> w(n, 0.0);
    if (n == 1) {
        w[0] = 0.0;
        return w;
    }
    for (std::size_t i = 0; i + 1 < n; ++i) {
        const double h = nodes[i + 1] - nodes[i];
        w[i] += 0.5 * h;
        w[i + 1] += 0.5 * h;
    }
    return w;
}

}  // namespace

std::size_t EnergyGrid::cell(double x) const {
    if (nodes.size() < 2) return 0;
    auto it = std::upper_bound(nodes.begin(), nodes.end(), x);
    std::size_t i = (it == nodes.begin()) ? 0 : static_cast<std::size_t>(it - nodes.begin()) - 1;
    return std::min(i, nodes.size() - 2);
}

EnergyGrid EnergyGrid::from_nodes(std::vector<double> nodes) {
    if (nodes.empty()) throw std::invalid_argument("EnergyGrid: empty node list");
    for (std::size_t i = 1; i < nodes.size(); ++i)
        if (!(nodes[i] > nodes[i - 1]))
            throw std::invalid_argument("EnergyGrid: nodes must be strictly increasing");
    EnergyGrid g;
    g.weights = trapezoid_weights(nodes);
    g.nodes = std::move(nodes);
    return g;
}

EnergyGrid EnergyGrid::uniform(double a, double b, std::size_t n) {
    if (n < 2 || !(b > a)) throw std::invalid_argument("EnergyGrid::uniform: bad range");
    std::vector<double> nodes(n);
    const double h = (b - a) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) nodes[i] = a + h * static_cast<double>(i);
    nodes.back() = b;
    return from_nodes(std::move(nodes));
}

EnergyGrid EnergyGrid::momentum_uniform(double mass, double p_lo, double p_hi, std::size_t n) {
    if (!(mass > 0.0)) throw std::invalid_argument("EnergyGrid: mass must be > 0");
    if (!(p_lo > 0.0) || !(p_hi > p_lo) || n < 2)
        throw std::invalid_argument("EnergyGrid::momentum_uniform: bad momentum range");
    std::vector<double> nodes(n);
    const double h = (p_hi - p_lo) / static_cast<double>(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        const double p = p_lo + h * static_cast<double>(i);
        nodes[i] = p * p / (2.0 * mass);
    }
    return from_nodes(std::move(nodes));
}

namespace {

template <typename T>
T interp_cubic_impl(std::span<const double> xs, std::span<const T> ys, double x) {
    const std::size_t n = xs.size();
    if (n != ys.size() || n == 0) throw std::invalid_argument("interp_cubic: size mismatch");
    if (x < xs.front() || x > xs.back())
        throw std::out_of_range("interp_cubic: abscissa out of range");
    if (n == 1) return ys[0];
    auto it = std::upper_bound(xs.begin(), xs.end(), x);
    std::size_t i = (it == xs.begin()) ? 0 : static_cast<std::size_t>(it - xs.begin()) - 1;
    i = std::min(i, n - 2);
    // centered 4-point stencil, clamped at the edges
    std::size_t lo = (i == 0) ? 0 : i - 1;
    std::size_t hi = std::min(lo + 3, n - 1);
    lo = (hi >= 3) ? hi - 3 : 0;
    T acc{};
    for (std::size_t k = lo; k <= hi; ++k) {
        double l = 1.0;
        for (std::size_t m = lo; m <= hi; ++m) {
            if (m == k) continue;
            l *= (x - xs[m]) / (xs[k] - xs[m]);
        }
        acc += ys[k] * l;
    }
    return acc;
}

}  // namespace

double interp_cubic(std::span<const double> xs, std::span<const double> ys, double x) {
    return interp_cubic_impl<double>(xs, ys, x);
}

Complex interp_cubic(std::span<const double> xs, std::span<const Complex> ys, double x) {
    return interp_cubic_impl<Complex>(xs, ys, x);
}

}  // namespace qscat
