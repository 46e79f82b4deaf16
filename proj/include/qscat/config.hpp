// config.hpp — JSON experiment configuration: parsing, validation with key
// paths, semiclassical-validity warnings, and builders for the library
// objects the commands need.

#pragma once

#include "qscat/channel.hpp"
#include "qscat/grid.hpp"
#include "qscat/operators.hpp"
#include "qscat/particle.hpp"
#include "qscat/potential.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace qscat {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ParticleConfig {
    std::string kind = "gaussian";  // gaussian | thermal
    double mass = 1.0;
    double p0 = 0.0;
    double x0 = 0.0;
    double sigma_p = 0.0;
    double beta = 1.0;  // thermal kind
    std::array<double, 2> direction_weights = {1.0, 0.0};
};

struct GridConfig {
    double momentum_span_sigmas = 6.0;
    std::size_t energy_nodes = 2001;
    std::size_t table_nodes = 4001;
    std::string amplitude_source = "table";  // table | exact
    double thermal_e_max_factor = 40.0;      // grid up to factor/beta
    double thermal_p_min = 1e-4;             // lowest momentum, thermal units
};

struct SweepConfig {
    std::string parameter = "lambda";
    std::vector<double> values;
};

struct QmeSection {
    double gamma = 0.1;
    double t_final = 10.0;
    std::size_t samples = 21;
    std::size_t trajectories = 0;  // 0 -> deterministic integration only
    double max_step = 0.0;
};

struct SmatrixSection {
    double e_min = 0.0;
    double e_max = 0.0;
    std::size_t count = 200;
};

struct ExperimentConfig {
    SystemSpec system;
    PotentialSpec potential;
    ParticleConfig particle;
    Matrix observable;
    double beta = 1.0;
    GridConfig grids;
    SweepConfig sweep;
    QmeSection qme;
    SmatrixSection smatrix;
    int output_precision = 17;
    std::uint64_t seed = 0;

    std::vector<std::string> warnings;  // semiclassical validity
    std::string canonical_json;         // sorted-key dump of the parsed file
    std::uint64_t config_hash = 0;

    static ExperimentConfig load(const std::string& path);
    static ExperimentConfig parse(const std::string& text);

    // Kinetic-energy grid matching the particle kind.
    EnergyGrid kinetic_grid(std::optional<std::size_t> nodes_override = {}) const;

    ParticleEnergyState particle_state(const EnergyGrid& grid) const;

    // Amplitude source per grids.amplitude_source, covering every total
    // energy the map assembly can query for this grid.
    std::shared_ptr<const AmplitudeSource> amplitude_source(const EnergyGrid& grid,
                                                            const PotentialSpec& pot) const;
    std::shared_ptr<const AmplitudeSource> amplitude_source(const EnergyGrid& grid) const {
        return amplitude_source(grid, potential);
    }

    double lambda_to_v0(double lambda) const;  // V0 = lambda*hbar*v0/a
};

std::uint64_t fnv1a64(const std::string& text);

}  // namespace qscat
