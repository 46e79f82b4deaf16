// particle.hpp — incoming particle states in the energy-direction
// representation rho_P^{aa'}(E, E'), and the classical force profile of a
// localized trajectory through the potential.

#pragma once

#include "qscat/grid.hpp"
#include "qscat/operators.hpp"
#include "qscat/potential.hpp"

#include <array>
#include <optional>

namespace qscat {

enum class ParticleKind { PureWavepacket, DiagonalEnsemble };

struct GaussianMeta {
    double p0 = 0.0;
    double x0 = 0.0;
    double sigma_p = 0.0;
};

class ParticleEnergyState {
  public:
    ParticleKind kind() const { return kind_; }
    const EnergyGrid& grid() const { return grid_; }
    double mass() const { return mass_; }
    double hbar() const { return hbar_; }
    const std::optional<GaussianMeta>& gaussian() const { return gaussian_; }
    std::optional<double> beta() const { return beta_; }

    // rho_P^{aa'}(E, E') = <E a| rho_P |E' a'>. For pure wavepackets this is
    // phi(E,a) conj(phi(E',a')); for diagonal ensembles the energy delta is
    // already absorbed, so the value is w^a(E) on the (Kronecker) diagonal
    // and zero otherwise.
    Complex coherence(double e, double e_prime, int dir, int dir_prime) const;

    // Diagonal weight w^a(E) (diagonal kind) or |phi(E,a)|^2 (pure kind).
    double diagonal(double e, int dir) const;

    // phi(E, a) for pure wavepackets (throws for diagonal ensembles).
    Complex amplitude(double e, int dir) const;

    // Quadrature norm: sum_a int |phi|^2 dE  or  sum_a int w^a dE.
    double norm() const;

    // |rho(E0 + d/2, E0 - d/2)| / rho(E0, E0) for the dominant direction.
    double coherence_ratio(double e0, double delta) const;

    static ParticleEnergyState gaussian_wavepacket(double mass, double p0, double x0,
                                                   double sigma_p, const EnergyGrid& grid,
                                                   double hbar = 1.0,
                                                   std::array<double, 2> dir_weights = {1.0,
                                                                                        0.0});

    // Thermal kinetic ensemble w^a(E) ~ exp(-beta E), normalized on the grid.
    static ParticleEnergyState narrow_thermal_ensemble(double mass, double beta,
                                                       const EnergyGrid& grid,
                                                       std::array<double, 2> dir_weights = {
                                                           1.0, 0.0});

    // Generic diagonal ensemble from tabulated weights (normalized on entry).
    static ParticleEnergyState diagonal_ensemble(double mass, const EnergyGrid& grid,
                                                 std::array<Eigen::VectorXd, 2> weights);

  private:
    ParticleKind kind_ = ParticleKind::PureWavepacket;
    EnergyGrid grid_;
    double mass_ = 1.0;
    double hbar_ = 1.0;
    double delta_tol_ = 1e-9;
    std::array<Vector, 2> phi_;            // pure amplitudes per direction
    std::array<Eigen::VectorXd, 2> w_;     // diagonal weights per direction
    std::optional<GaussianMeta> gaussian_;
    std::optional<double> beta_;

    Complex phi_at(double e, int dir) const;
    double w_at(double e, int dir) const;
};

// Time supports [t_on, t_off] with constant values, one list per
// decomposition term: f^l(t) = profile^l(x0 + v0 t).
struct ForceProfile {
    struct Window {
        double t_on = 0.0;
        double t_off = 0.0;
        double value = 0.0;
    };
    std::vector<std::vector<Window>> per_term;
    double x0 = 0.0;
    double v0 = 0.0;

    double eval(std::size_t term, double t) const;
    // Earliest onset / latest offset over all terms (0,0 when empty).
    std::pair<double, double> support() const;
};

ForceProfile force_profile(const PotentialSpec& pot, double x0, double v0);

}  // namespace qscat
