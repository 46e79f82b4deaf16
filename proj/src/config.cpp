#include "qscat/config.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace qscat {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) {
    throw ConfigError("config: " + path + ": " + what);
}

const json& need(const json& j, const std::string& key, const std::string& path) {
    if (!j.contains(key)) fail(path + "." + key, "missing");
    return j.at(key);
}

double need_num(const json& j, const std::string& key, const std::string& path) {
    const json& v = need(j, key, path);
    if (!v.is_number()) fail(path + "." + key, "expected a number");
    return v.get<double>();
}

Matrix parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty()) fail(path, "expected a non-empty array of rows");
    const std::size_t n = j.size();
    Matrix m(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    for (std::size_t r = 0; r < n; ++r) {
        const json& row = j.at(r);
        if (!row.is_array() || row.size() != n) fail(path, "matrix must be square");
        for (std::size_t c = 0; c < n; ++c) {
            const json& e = row.at(c);
            if (e.is_number()) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    e.get<double>();
            } else if (e.is_array() && e.size() == 2 && e.at(0).is_number() &&
                       e.at(1).is_number()) {
                m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
                    Complex(e.at(0).get<double>(), e.at(1).get<double>());
            } else {
                fail(path, "matrix entries must be numbers or [re, im] pairs");
            }
        }
    }
    return m;
}

}  // namespace

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

ExperimentConfig ExperimentConfig::parse(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }

    ExperimentConfig cfg;
    cfg.canonical_json = j.dump();
    cfg.config_hash = fnv1a64(cfg.canonical_json);

    // system
    {
        const json& sys = need(j, "system", "");
        const json& en = need(sys, "energies", "system");
        if (!en.is_array() || en.empty()) fail("system.energies", "expected an array");
        std::vector<double> energies;
        for (const auto& e : en) {
            if (!e.is_number()) fail("system.energies", "expected numbers");
            energies.push_back(e.get<double>());
        }
        cfg.system.energies = std::move(energies);
        cfg.system.hbar = sys.contains("hbar") ? need_num(sys, "hbar", "system") : 1.0;
        if (sys.contains("labels"))
            for (const auto& l : sys.at("labels"))
                cfg.system.labels.push_back(l.get<std::string>());
        try {
            cfg.system.validate();
        } catch (const std::exception& e) {
            fail("system", e.what());
        }
    }

    // potential
    {
        const json& pot = need(j, "potential", "");
        const double mass = pot.contains("mass") ? need_num(pot, "mass", "potential") : 1.0;
        const json& terms = need(pot, "terms", "potential");
        if (!terms.is_array() || terms.empty())
            fail("potential.terms", "expected a non-empty array");
        std::vector<PotentialTerm> parsed;
        for (std::size_t l = 0; l < terms.size(); ++l) {
            const std::string path = "potential.terms[" + std::to_string(l) + "]";
            PotentialTerm term;
            term.system_op = parse_matrix(need(terms.at(l), "matrix", path), path + ".matrix");
            const json& prof = need(terms.at(l), "profile", path);
            if (!prof.is_array() || prof.empty()) fail(path + ".profile", "expected boxcars");
            for (const auto& b : prof) {
                BoxProfile box;
                box.x_left = need_num(b, "x_left", path + ".profile");
                box.x_right = need_num(b, "x_right", path + ".profile");
                box.value = need_num(b, "value", path + ".profile");
                term.profile.push_back(box);
            }
            parsed.push_back(std::move(term));
        }
        try {
            cfg.potential = PotentialSpec::from_terms(mass, std::move(parsed),
                                                      cfg.system.dim());
        } catch (const std::exception& e) {
            fail("potential", e.what());
        }
    }

    // particle
    {
        const json& p = need(j, "particle", "");
        cfg.particle.kind = p.contains("kind") ? p.at("kind").get<std::string>() : "gaussian";
        if (cfg.particle.kind != "gaussian" && cfg.particle.kind != "thermal")
            fail("particle.kind", "expected gaussian | thermal");
        cfg.particle.mass = cfg.potential.mass;
        if (cfg.particle.kind == "gaussian") {
            cfg.particle.p0 = need_num(p, "p0", "particle");
            cfg.particle.x0 = need_num(p, "x0", "particle");
            cfg.particle.sigma_p = need_num(p, "sigma_p", "particle");
        } else {
            cfg.particle.beta = need_num(p, "beta", "particle");
        }
        if (p.contains("direction_weights")) {
            const json& w = p.at("direction_weights");
            if (!w.is_array() || w.size() != 2)
                fail("particle.direction_weights", "expected two weights");
            cfg.particle.direction_weights = {w.at(0).get<double>(), w.at(1).get<double>()};
        }
    }

    // observable
    cfg.observable =
        parse_matrix(need(need(j, "observable", ""), "matrix", "observable"),
                     "observable.matrix");
    if (cfg.observable.rows() != cfg.system.dim()) fail("observable.matrix", "dimension mismatch");
    if (max_abs(cfg.observable - cfg.observable.adjoint().eval()) >
        1e-12 * std::max(1.0, max_abs(cfg.observable)))
        fail("observable.matrix", "matrix is not Hermitian");

    cfg.beta = j.contains("beta") ? need_num(j, "beta", "") : 1.0;

    if (j.contains("grids")) {
        const json& g = j.at("grids");
        if (g.contains("momentum_span_sigmas"))
            cfg.grids.momentum_span_sigmas = need_num(g, "momentum_span_sigmas", "grids");
        if (g.contains("energy_nodes"))
            cfg.grids.energy_nodes = g.at("energy_nodes").get<std::size_t>();
        if (g.contains("table_nodes"))
            cfg.grids.table_nodes = g.at("table_nodes").get<std::size_t>();
        if (g.contains("amplitude_source")) {
            cfg.grids.amplitude_source = g.at("amplitude_source").get<std::string>();
            if (cfg.grids.amplitude_source != "table" && cfg.grids.amplitude_source != "exact")
                fail("grids.amplitude_source", "expected table | exact");
        }
        if (g.contains("thermal_e_max_factor"))
            cfg.grids.thermal_e_max_factor = need_num(g, "thermal_e_max_factor", "grids");
        if (g.contains("thermal_p_min"))
            cfg.grids.thermal_p_min = need_num(g, "thermal_p_min", "grids");
    }

    if (j.contains("sweep")) {
        const json& s = j.at("sweep");
        cfg.sweep.parameter =
            s.contains("parameter") ? s.at("parameter").get<std::string>() : "lambda";
        if (cfg.sweep.parameter != "lambda")
            fail("sweep.parameter", "only the lambda sweep is defined");
        if (s.contains("values"))
            for (const auto& v : s.at("values")) cfg.sweep.values.push_back(v.get<double>());
    }

    if (j.contains("qme")) {
        const json& q = j.at("qme");
        if (q.contains("gamma")) cfg.qme.gamma = need_num(q, "gamma", "qme");
        if (q.contains("t_final")) cfg.qme.t_final = need_num(q, "t_final", "qme");
        if (q.contains("samples")) cfg.qme.samples = q.at("samples").get<std::size_t>();
        if (q.contains("trajectories"))
            cfg.qme.trajectories = q.at("trajectories").get<std::size_t>();
        if (q.contains("max_step")) cfg.qme.max_step = need_num(q, "max_step", "qme");
    }

    if (j.contains("smatrix")) {
        const json& s = j.at("smatrix");
        cfg.smatrix.e_min = need_num(s, "e_min", "smatrix");
        cfg.smatrix.e_max = need_num(s, "e_max", "smatrix");
        if (s.contains("count")) cfg.smatrix.count = s.at("count").get<std::size_t>();
    }

    if (j.contains("output")) {
        const json& o = j.at("output");
        if (o.contains("precision")) cfg.output_precision = o.at("precision").get<int>();
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();

    // semiclassical validity warnings for the localized-particle comparison
    if (cfg.particle.kind == "gaussian") {
        const double hbar = cfg.system.hbar;
        const double p0 = cfg.particle.p0;
        const double e_p0 = p0 * p0 / (2.0 * cfg.particle.mass);
        const double v0 = p0 / cfg.particle.mass;
        double v_max = 0.0, width = 0.0;
        for (const auto& seg : cfg.potential.segments) {
            v_max = std::max(v_max, max_abs(seg.coupling));
            width = std::max(width, seg.x_right - seg.x_left);
        }
        double gap = 0.0;
        for (double d : bohr_frequencies(cfg.system)) gap = std::max(gap, d);
        if (v_max > 0.0 && e_p0 < 10.0 * v_max)
            cfg.warnings.push_back("validity: E_p0 >> V0 violated");
        if (width > 0.0 && p0 * width < 10.0 * hbar)
            cfg.warnings.push_back("validity: p0 a >> hbar violated");
        if (p0 < 10.0 * cfg.particle.sigma_p)
            cfg.warnings.push_back("validity: p0 >> sigma_p violated");
        if (gap > 0.0 && cfg.particle.sigma_p < 10.0 * gap / v0)
            cfg.warnings.push_back("validity: sigma_p >> Delta/v0 violated");
    }
    return cfg;
}

EnergyGrid ExperimentConfig::kinetic_grid(std::optional<std::size_t> nodes_override) const {
    const std::size_t n = nodes_override.value_or(grids.energy_nodes);
    if (particle.kind == "gaussian") {
        const double lo = particle.p0 - grids.momentum_span_sigmas * particle.sigma_p;
        const double hi = particle.p0 + grids.momentum_span_sigmas * particle.sigma_p;
        if (!(lo > 0.0))
            throw ConfigError("config: momentum span reaches p <= 0; narrow it");
        return EnergyGrid::momentum_uniform(particle.mass, lo, hi, n);
    }
    const double p_th = std::sqrt(2.0 * particle.mass / particle.beta);
    const double p_lo = grids.thermal_p_min * p_th;
    const double p_hi = std::sqrt(2.0 * particle.mass * grids.thermal_e_max_factor /
                                  particle.beta);
    EnergyGrid g = EnergyGrid::momentum_uniform(particle.mass, p_lo, p_hi, n);
    // keep quadrature nodes clear of channel thresholds
    for (std::size_t i = 0; i < g.nodes.size(); ++i)
        for (double e : system.energies)
            for (double ek : system.energies) {
                const double th = ek - e;
                if (th > 0.0 && std::abs(g.nodes[i] - th) < 8.0 * kThresholdEps)
                    g.nodes[i] = th + 16.0 * kThresholdEps;
            }
    return EnergyGrid::from_nodes(std::move(g.nodes));
}

ParticleEnergyState ExperimentConfig::particle_state(const EnergyGrid& grid) const {
    if (particle.kind == "gaussian")
        return ParticleEnergyState::gaussian_wavepacket(particle.mass, particle.p0,
                                                        particle.x0, particle.sigma_p, grid,
                                                        system.hbar,
                                                        particle.direction_weights);
    return ParticleEnergyState::narrow_thermal_ensemble(particle.mass, particle.beta, grid,
                                                        particle.direction_weights);
}

std::shared_ptr<const AmplitudeSource> ExperimentConfig::amplitude_source(
    const EnergyGrid& grid, const PotentialSpec& pot) const {
    if (grids.amplitude_source == "exact")
        return std::make_shared<ExactAmplitudes>(system, pot);
    double shift = 0.0;
    for (double d : bohr_frequencies(system)) shift = std::max(shift, std::abs(d));
    const double e_lo =
        std::max(system.energies.front() + 2.0 * kThresholdEps,
                 grid.lo() - 2.0 * shift + system.energies.front() - 1e-9);
    const double e_hi = grid.hi() + 2.0 * shift + system.energies.back() + 1e-9;
    return std::make_shared<SMatrixTable>(
        SMatrixTable::build(system, pot, e_lo, e_hi, grids.table_nodes));
}

double ExperimentConfig::lambda_to_v0(double lambda) const {
    double width = 0.0;
    for (const auto& seg : potential.segments)
        width = std::max(width, seg.x_right - seg.x_left);
    if (!(width > 0.0)) throw ConfigError("config: lambda sweep needs a finite barrier");
    const double v0 = particle.p0 / particle.mass;
    return lambda * system.hbar * v0 / width;
}

}  // namespace qscat
