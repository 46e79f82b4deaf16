#include "qscat/runner.hpp"

#include "qscat/collision.hpp"
#include "qscat/csv.hpp"
#include "qscat/kubo.hpp"
#include "qscat/qme.hpp"
#include "qscat/response.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

namespace qscat {

namespace {

std::string out_path(const RunnerOptions& opt, const std::string& name) {
    std::filesystem::create_directories(opt.out_dir);
    return (std::filesystem::path(opt.out_dir) / name).string();
}

void stamp(CsvWriter& w, const ExperimentConfig& cfg, const RunnerOptions& opt) {
    std::ostringstream hash;
    hash << std::hex << cfg.config_hash;
    w.metadata("config_hash", hash.str());
    w.metadata("seed", std::to_string(opt.seed.value_or(cfg.seed)));
    for (const auto& warn : cfg.warnings) w.metadata("warning", warn);
}

Matrix random_density(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Matrix a(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = Complex(gauss(rng), gauss(rng));
    Matrix rho = a * a.adjoint();
    rho /= rho.trace().real();
    return rho;
}

Matrix random_hermitian(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss;
    Matrix a(n, n);
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) a(r, c) = Complex(gauss(rng), gauss(rng));
    return 0.5 * (a + a.adjoint().eval());
}

struct MapBundle {
    EnergyGrid grid;
    std::shared_ptr<const EigenOpTable> eig;
    std::unique_ptr<CollisionMap> map;
    ParticleEnergyState particle;
};

MapBundle build_map(const ExperimentConfig& cfg, const PotentialSpec& pot,
                    std::optional<std::size_t> nodes, bool parallel = true) {
    EnergyGrid grid = cfg.kinetic_grid(nodes);
    ParticleEnergyState particle = cfg.particle_state(grid);
    auto source = cfg.amplitude_source(grid, pot);
    auto eig = std::make_shared<EigenOpTable>(
        EigenOpTable::build(cfg.system, grid, source, parallel));
    auto map = std::make_unique<CollisionMap>(
        CollisionMap::build(eig, particle, parallel));
    return {std::move(grid), std::move(eig), std::move(map), std::move(particle)};
}

}  // namespace

int cmd_smatrix(const ExperimentConfig& cfg, const RunnerOptions& opt) {
    const int n = cfg.system.dim();
    double e_min = cfg.smatrix.e_min, e_max = cfg.smatrix.e_max;
    if (!(e_max > e_min)) {
        const EnergyGrid grid = cfg.kinetic_grid(opt.grid_nodes);
        e_min = grid.lo() + cfg.system.energies.front();
        e_max = grid.hi() + cfg.system.energies.back();
    }
    const std::size_t count = std::max<std::size_t>(2, cfg.smatrix.count);

    CsvWriter w(out_path(opt, "smatrix.csv"), cfg.output_precision);
    stamp(w, cfg, opt);
    std::vector<std::string> cols{"E", "status", "n_open"};
    for (int dp = 0; dp < 2; ++dp)
        for (int jp = 0; jp < n; ++jp)
            for (int d = 0; d < 2; ++d)
                for (int j = 0; j < n; ++j) {
                    const std::string tag = std::to_string(dp) + std::to_string(jp) + "_" +
                                            std::to_string(d) + std::to_string(j);
                    cols.push_back("s_re_" + tag);
                    cols.push_back("s_im_" + tag);
                }
    cols.insert(cols.end(), {"unitarity_dev", "optical_dev", "im_forward_max", "sigma_min_eig"});
    w.header(cols);

    double worst_unitarity = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double e =
            e_min + (e_max - e_min) * static_cast<double>(i) / static_cast<double>(count - 1);
        std::vector<std::string> cells{w.cell(e)};
        try {
            const SMatrixBlock block = solve_smatrix(cfg.system, cfg.potential, e);
            const UnitarityReport u = verify_unitarity(block);
            const OpticalReport o = verify_optical_theorem(block);
            worst_unitarity = std::max(worst_unitarity, u.max());
            cells.emplace_back("ok");
            cells.push_back(std::to_string(block.n_open()));
            const Matrix t = block.t_full();
            const Matrix s_full = -kI * t;  // s = 1 - i t on open entries
            for (int dp = 0; dp < 2; ++dp)
                for (int jp = 0; jp < n; ++jp)
                    for (int d = 0; d < 2; ++d)
                        for (int j = 0; j < n; ++j) {
                            Complex s = s_full(dp * n + jp, d * n + j);
                            if (dp == d && jp == j && block.is_open(j)) s += 1.0;
                            cells.push_back(w.cell(s.real()));
                            cells.push_back(w.cell(s.imag()));
                        }
            cells.push_back(w.cell(u.max()));
            cells.push_back(w.cell(std::max(o.max_identity_dev, o.max_forward_dev)));
            cells.push_back(w.cell(o.max_im_forward));
            cells.push_back(w.cell(o.min_sigma_eig));
        } catch (const ThresholdError&) {
            cells.emplace_back("threshold_skip");
            while (cells.size() < cols.size()) cells.emplace_back("0");
        }
        w.row(cells);
    }
    return 0;
}

int cmd_collide(const ExperimentConfig& cfg, const RunnerOptions& opt) {
    const int n = cfg.system.dim();
    MapBundle bundle = build_map(cfg, cfg.potential, opt.grid_nodes);
    const DensityMatrix rho0 = thermal_state(cfg.system, cfg.beta);
    const DensityMatrix rho1 = bundle.map->apply(rho0);
    const HermitianOperator obs(cfg.observable);
    const ObservableChange ch = bundle.map->observable_changes(rho0, obs);

    Eigen::SelfAdjointEigenSolver<Matrix> es(rho1.matrix(), Eigen::EigenvaluesOnly);

    CsvWriter w(out_path(opt, "collide.csv"), cfg.output_precision);
    stamp(w, cfg, opt);
    std::vector<std::string> cols;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            cols.push_back("rho_re_" + std::to_string(r) + std::to_string(c));
            cols.push_back("rho_im_" + std::to_string(r) + std::to_string(c));
        }
    cols.insert(cols.end(), {"dA_ls", "dA_d", "dA", "trace_err", "herm_err", "min_eig",
                             "dropped_weight", "closed_weight"});
    if (opt.oracle) cols.insert(cols.end(), {"oracle_max_rel_diff", "oracle_leaked"});
    w.header(cols);

    std::vector<std::string> cells;
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            cells.push_back(w.cell(rho1.matrix()(r, c).real()));
            cells.push_back(w.cell(rho1.matrix()(r, c).imag()));
        }
    cells.push_back(w.cell(ch.lamb_shift));
    cells.push_back(w.cell(ch.dissipative));
    cells.push_back(w.cell(ch.total));
    cells.push_back(w.cell(std::abs(rho1.matrix().trace().real() - 1.0)));
    cells.push_back(w.cell(max_abs(rho1.matrix() - rho1.matrix().adjoint().eval())));
    cells.push_back(w.cell(es.eigenvalues().minCoeff()));
    cells.push_back(w.cell(bundle.map->diagnostics().dropped_weight));
    cells.push_back(w.cell(bundle.map->diagnostics().closed_weight));

    int code = 0;
    if (opt.oracle) {
        OracleOptions oo;
        oo.nodes = opt.grid_nodes.value_or(cfg.grids.energy_nodes);
        const OracleResult oracle =
            full_space_oracle(cfg.system, cfg.potential, rho0, bundle.particle, oo);
        const double scale = std::max(1e-300, max_abs(oracle.rho));
        const double rel = max_abs(rho1.matrix() - oracle.rho) / scale;
        cells.push_back(w.cell(rel));
        cells.push_back(w.cell(oracle.leaked));
        if (rel > 1e-3) code = 2;
    }
    w.row(cells);
    return code;
}

int cmd_response(const ExperimentConfig& cfg, const RunnerOptions& opt) {
    MapBundle bundle = build_map(cfg, cfg.potential, opt.grid_nodes);
    const Matrix rho = thermal_state(cfg.system, cfg.beta).matrix();

    std::vector<double> times;
    for (int i = 0; i <= 100; ++i)
        times.push_back(cfg.system.hbar * 2.0 * 3.141592653589793 *
                        static_cast<double>(i) / 100.0);
    const ResponseSpectrum sp = build_response_spectrum(
        *bundle.eig, rho, cfg.observable, bundle.particle, times,
        std::max<std::size_t>(1, bundle.grid.size() / 64));

    CsvWriter w(out_path(opt, "response.csv"), cfg.output_precision);
    stamp(w, cfg, opt);
    w.metadata("chi_A_re", format_sig(sp.chi_a.real(), cfg.output_precision));
    w.metadata("chi_A_im", format_sig(sp.chi_a.imag(), cfg.output_precision));
    w.header({"Ep", "delta", "dir_out", "dir_in", "chi_re", "chi_im", "C_re", "C_im"});
    for (const auto& r : sp.rows)
        w.row({w.cell(r.ep), w.cell(r.delta), std::to_string(r.dir_out),
               std::to_string(r.dir_in), w.cell(r.chi.real()), w.cell(r.chi.imag()),
               w.cell(r.corr.real()), w.cell(r.corr.imag())});

    CsvWriter wt(out_path(opt, "response_time.csv"), cfg.output_precision);
    stamp(wt, cfg, opt);
    wt.header({"t", "chi_re", "chi_im", "C_re", "C_im"});
    for (std::size_t k = 0; k < sp.times.size(); ++k)
        wt.row({wt.cell(sp.times[k]), wt.cell(sp.chi_time[k].real()),
                wt.cell(sp.chi_time[k].imag()), wt.cell(sp.corr_time[k].real()),
                wt.cell(sp.corr_time[k].imag())});
    return 0;
}

int cmd_fdr(const ExperimentConfig& cfg, const RunnerOptions& opt) {
    MapBundle bundle = build_map(cfg, cfg.potential, opt.grid_nodes);
    std::mt19937_64 rng(opt.seed.value_or(cfg.seed));

    CsvWriter w(out_path(opt, "fdr.csv"), cfg.output_precision);
    stamp(w, cfg, opt);
    w.header({"Ep", "observable", "max_dev", "max_dev_split"});
    double worst = 0.0;
    for (int q = 1; q <= 4; ++q) {
        const double ep = bundle.grid.nodes[q * (bundle.grid.size() - 1) / 4];
        for (int k = 0; k < 3; ++k) {
            const Matrix a =
                (k == 0) ? cfg.observable : random_hermitian(cfg.system.dim(), rng);
            const FdrReport rep = fdr_check(*bundle.eig, cfg.system, cfg.beta, a, ep);
            worst = std::max({worst, rep.max_dev, rep.max_dev_split});
            w.row({w.cell(ep), k == 0 ? std::string("config") : "random" + std::to_string(k),
                   w.cell(rep.max_dev), w.cell(rep.max_dev_split)});
        }
    }
    w.metadata("max_dev_overall", format_sig(worst, cfg.output_precision));
    return worst <= 1e-12 ? 0 : 2;
}

int cmd_sweep(const ExperimentConfig& cfg, const RunnerOptions& opt) {
    if (cfg.sweep.values.empty()) throw ConfigError("config: sweep.values is empty");
    double base = 0.0;
    for (const auto& term : cfg.potential.terms)
        for (const auto& box : term.profile) base = std::max(base, std::abs(box.value));
    if (!(base > 0.0)) throw ConfigError("config: sweep needs a nonzero potential");

    struct Row {
        double lambda, exact, kubo, diff;
    };
    std::vector<Row> rows(cfg.sweep.values.size());

    for (std::size_t k = 0; k < cfg.sweep.values.size(); ++k) {
        const double lambda = cfg.sweep.values[k];
        const double v0_target = cfg.lambda_to_v0(lambda);
        const PotentialSpec pot = cfg.potential.scaled(v0_target / base);

        MapBundle bundle = build_map(cfg, pot, opt.grid_nodes);
        const DensityMatrix rho0 = thermal_state(cfg.system, cfg.beta);
        const HermitianOperator obs(cfg.observable);
        const ObservableChange ch = bundle.map->observable_changes(rho0, obs);

        KuboConfig kc;
        kc.spec = cfg.system;
        kc.pot = pot;
        kc.rho_S = rho0.matrix();
        kc.obs = cfg.observable;
        kc.x0 = cfg.particle.x0;
        kc.v0 = cfg.particle.p0 / cfg.particle.mass;
        const KuboResult kubo = kubo_convolution(kc);

        rows[k] = {lambda, ch.total, kubo.value, std::abs(ch.total - kubo.value)};
    }

    CsvWriter w(out_path(opt, "sweep.csv"), cfg.output_precision);
    stamp(w, cfg, opt);
    w.header({"lambda", "dA_exact", "dA_kubo", "abs_diff"});
    for (const auto& r : rows)
        w.row_values({r.lambda, r.exact, r.kubo, r.diff});
    return 0;
}

int cmd_qme(const ExperimentConfig& cfg, const RunnerOptions& opt) {
    const int n = cfg.system.dim();
    MapBundle bundle = build_map(cfg, cfg.potential, opt.grid_nodes);

    QmeConfig qc;
    qc.gamma = cfg.qme.gamma;
    qc.t_final = cfg.qme.t_final;
    qc.max_step = cfg.qme.max_step;
    qc.trajectories = cfg.qme.trajectories;
    qc.seed = opt.seed.value_or(cfg.seed);
    for (std::size_t i = 0; i < cfg.qme.samples; ++i)
        qc.sample_times.push_back(cfg.qme.t_final * static_cast<double>(i) /
                                  static_cast<double>(std::max<std::size_t>(1, cfg.qme.samples - 1)));

    Matrix ground = Matrix::Zero(n, n);
    ground(0, 0) = 1.0;
    const DensityMatrix rho0(std::move(ground));

    const QmeTrajectory traj = integrate_qme(cfg.system, *bundle.map, qc, rho0);

    CsvWriter w(out_path(opt, "qme.csv"), cfg.output_precision);
    stamp(w, cfg, opt);
    std::vector<std::string> cols{"t"};
    for (int r = 0; r < n; ++r)
        for (int c = 0; c < n; ++c) {
            cols.push_back("rho_re_" + std::to_string(r) + std::to_string(c));
            cols.push_back("rho_im_" + std::to_string(r) + std::to_string(c));
        }
    cols.push_back("trace_err");
    w.header(cols);
    for (std::size_t k = 0; k < traj.times.size(); ++k) {
        std::vector<double> vals{traj.times[k]};
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                vals.push_back(traj.states[k](r, c).real());
                vals.push_back(traj.states[k](r, c).imag());
            }
        vals.push_back(std::abs(traj.states[k].trace().real() - 1.0));
        w.row_values(vals);
    }

    if (cfg.qme.trajectories > 0) {
        const McTrajectory mc =
            monte_carlo_trajectories(cfg.system, *bundle.map, qc, rho0);
        CsvWriter wm(out_path(opt, "qme_mc.csv"), cfg.output_precision);
        stamp(wm, cfg, opt);
        std::vector<std::string> mc_cols{"t"};
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c) {
                const std::string tag = std::to_string(r) + std::to_string(c);
                mc_cols.push_back("mc_re_" + tag);
                mc_cols.push_back("mc_im_" + tag);
                mc_cols.push_back("se_re_" + tag);
                mc_cols.push_back("se_im_" + tag);
            }
        mc_cols.push_back("max_sigma_distance");
        wm.header(mc_cols);
        int code = 0;
        for (std::size_t k = 0; k < mc.times.size(); ++k) {
            std::vector<double> vals{mc.times[k]};
            double worst = 0.0;
            for (int r = 0; r < n; ++r)
                for (int c = 0; c < n; ++c) {
                    vals.push_back(mc.mean[k](r, c).real());
                    vals.push_back(mc.mean[k](r, c).imag());
                    vals.push_back(mc.se_real[k](r, c));
                    vals.push_back(mc.se_imag[k](r, c));
                    // once every trajectory has relaxed the ensemble spread
                    // collapses below the integrator accuracy; the floor keeps
                    // the gate from dividing integrator dust by zero spread
                    const double floor = 1e-9;
                    worst = std::max(
                        worst,
                        std::abs(mc.mean[k](r, c).real() - traj.states[k](r, c).real()) /
                            std::max(floor, mc.se_real[k](r, c)));
                    worst = std::max(
                        worst,
                        std::abs(mc.mean[k](r, c).imag() - traj.states[k](r, c).imag()) /
                            std::max(floor, mc.se_imag[k](r, c)));
                }
            vals.push_back(worst);
            wm.row_values(vals);
            if (worst > 5.0) code = 2;  // generous gate for the CLI path
        }
        return code;
    }
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg, const RunnerOptions& opt) {
    std::ostream& os = std::cout;
    bool all_ok = true;
    const auto report = [&](const std::string& name, bool ok, double value) {
        os << (ok ? "PASS" : "FAIL") << "  " << name << "  (" << format_sig(value, 6)
           << ")\n";
        all_ok = all_ok && ok;
    };

    // solver identities over the configured energy window
    {
        const EnergyGrid grid = cfg.kinetic_grid(std::size_t{64});
        double worst_u = 0.0, worst_o = 0.0, worst_im = -1.0, worst_gram = 0.0;
        for (std::size_t i = 0; i < grid.size(); i += 4) {
            const double e = nudge_off_thresholds(
                grid.nodes[i] + cfg.system.energies.back(), cfg.system.energies);
            const SMatrixBlock block = solve_smatrix(cfg.system, cfg.potential, e);
            worst_u = std::max(worst_u, verify_unitarity(block).max());
            const OpticalReport o = verify_optical_theorem(block);
            worst_o = std::max({worst_o, o.max_identity_dev, o.max_forward_dev});
            worst_im = std::max(worst_im, o.max_im_forward);
            worst_gram = std::min(worst_gram, o.min_sigma_eig);
        }
        report("solver.unitarity", worst_u < 1e-10, worst_u);
        report("solver.optical_theorem", worst_o < 1e-10, worst_o);
        report("solver.im_forward_nonpositive", worst_im <= 1e-12, worst_im);
        report("solver.cross_section_psd", worst_gram >= -1e-12, worst_gram);
    }

    // built-in analytic oracles
    {
        const SystemSpec one = make_system({0.0});
        const PotentialSpec barrier =
            barrier_potential(1.0, Matrix::Identity(1, 1), 1.0, -0.5, 0.5);
        double worst = 0.0;
        for (double e : {2.0, 3.7, 9.1}) {
            const SMatrixBlock block = solve_smatrix(one, barrier, e);
            const double k = std::sqrt(2.0 * e), q = std::sqrt(2.0 * (e - 1.0));
            const Complex denom =
                2.0 * std::cos(q) - kI * Complex((k / q + q / k) * std::sin(q));
            const Complex tau = 2.0 * std::exp(-kI * Complex(k)) / denom;
            worst = std::max(worst, std::abs(block.s_entry(kPlus, 0, kPlus, 0) - tau));
        }
        report("oracle.single_barrier", worst < 1e-8, worst);

        const SystemSpec degen = make_system({0.0, 0.0});
        Matrix sx(2, 2);
        sx << 0, 1, 1, 0;
        const PotentialSpec pot2 = barrier_potential(1.0, sx, 0.8, -0.5, 0.5);
        double worst2 = 0.0;
        for (double e : {2.0, 5.0}) {
            const SMatrixBlock block = solve_smatrix(degen, pot2, e);
            for (int d = 0; d < 2; ++d) {
                // rotate the +/- eigenchannel scalars back to the site basis
                Complex spm[2];
                for (int pm = 0; pm < 2; ++pm) {
                    const double v = (pm == 0) ? 0.8 : -0.8;
                    const SystemSpec one_l = make_system({0.0});
                    const PotentialSpec p1 =
                        barrier_potential(1.0, Matrix::Identity(1, 1), v, -0.5, 0.5);
                    const SMatrixBlock b1 = solve_smatrix(one_l, p1, e);
                    spm[pm] = b1.s_entry(d, 0, kPlus, 0);
                }
                const Complex diag = 0.5 * (spm[0] + spm[1]);
                const Complex off = 0.5 * (spm[0] - spm[1]);
                worst2 = std::max(worst2,
                                  std::abs(block.s_entry(d, 0, kPlus, 0) - diag));
                worst2 = std::max(worst2,
                                  std::abs(block.s_entry(d, 1, kPlus, 0) - off));
            }
        }
        report("oracle.degenerate_decoupling", worst2 < 1e-8, worst2);
    }

    // map validity on the configured model
    {
        MapBundle bundle = build_map(cfg, cfg.potential, opt.grid_nodes);
        std::mt19937_64 rng(opt.seed.value_or(cfg.seed));
        double trace_err = 0.0, herm_err = 0.0, min_eig = 0.0;
        for (int k = 0; k < 20; ++k) {
            const Matrix rho = (k == 0) ? thermal_state(cfg.system, cfg.beta).matrix()
                                        : random_density(cfg.system.dim(), rng);
            const Matrix out = bundle.map->apply_linear(rho);
            trace_err = std::max(trace_err, std::abs(out.trace().real() - 1.0));
            herm_err = std::max(herm_err, max_abs(out - out.adjoint().eval()));
            Eigen::SelfAdjointEigenSolver<Matrix> es(
                Matrix(0.5 * (out + out.adjoint().eval())), Eigen::EigenvaluesOnly);
            min_eig = std::min(min_eig, es.eigenvalues().minCoeff());
        }
        report("map.trace_preserving", trace_err < 1e-6, trace_err);
        report("map.hermiticity", herm_err < 1e-10, herm_err);
        report("map.positivity", min_eig >= -1e-6, min_eig);
        if (cfg.system.dim() <= 4) {
            Eigen::SelfAdjointEigenSolver<Matrix> es(bundle.map->choi(),
                                                     Eigen::EigenvaluesOnly);
            const double choi_min = es.eigenvalues().minCoeff();
            report("map.choi_positive", choi_min >= -1e-5, choi_min);
        }

        // FDR at machine precision
        std::mt19937_64 rng2(7);
        double fdr_worst = 0.0;
        for (int q = 1; q <= 4; ++q) {
            const double ep = bundle.grid.nodes[q * (bundle.grid.size() - 1) / 4];
            for (int k = 0; k < 3; ++k) {
                const Matrix a = (k == 0) ? cfg.observable
                                          : random_hermitian(cfg.system.dim(), rng2);
                const FdrReport rep = fdr_check(*bundle.eig, cfg.system, cfg.beta, a, ep);
                fdr_worst = std::max({fdr_worst, rep.max_dev, rep.max_dev_split});
            }
        }
        report("response.fdr_identity", fdr_worst <= 1e-12, fdr_worst);

        // aggregated response vs Lamb-shift change
        const DensityMatrix rho0 = thermal_state(cfg.system, cfg.beta);
        const HermitianOperator obs(cfg.observable);
        const Complex chi_a = chi_aggregate(*bundle.eig, rho0.matrix(), cfg.observable,
                                            bundle.particle);
        const ObservableChange ch = bundle.map->observable_changes(rho0, obs);
        const double re_dev = std::abs(chi_a.real() - ch.lamb_shift);
        report("response.re_chi_equals_dA_ls", re_dev < 1e-10, re_dev);

        // x0 sensitivity of dA, reported as information: the coherence phases
        // of a displaced packet shift the post-collision precession, so dA is
        // x0-periodic rather than invariant (see the acceptance suite)
        if (cfg.particle.kind == "gaussian") {
            ExperimentConfig shifted = cfg;
            shifted.particle.x0 += 1.0;
            MapBundle bundle2 = build_map(shifted, shifted.potential, opt.grid_nodes);
            const ObservableChange ch2 = bundle2.map->observable_changes(rho0, obs);
            os << "INFO  map.x0_shift_drift_dA  (" << format_sig(ch2.total - ch.total, 6)
               << " under x0 -> x0 + 1)\n";
        }
    }

    // narrow-state reduction against the dedicated forms
    {
        ExperimentConfig narrow = cfg;
        narrow.particle.kind = "thermal";
        narrow.particle.beta = cfg.beta;
        narrow.grids.amplitude_source = "exact";
        const EnergyGrid grid = narrow.kinetic_grid(std::size_t{1501});
        const ParticleEnergyState ens = narrow.particle_state(grid);
        auto source = narrow.amplitude_source(grid, narrow.potential);
        auto eig = std::make_shared<EigenOpTable>(
            EigenOpTable::build(narrow.system, grid, source));
        const CollisionMap map = CollisionMap::build(eig, ens);
        const Matrix h_generic = map.lamb_shift().matrix();
        const Matrix h_narrow = narrow_lamb_shift(*eig, ens).matrix();
        const double h_dev = max_abs(h_generic - h_narrow);
        report("narrow.lamb_shift_reduction", h_dev < 1e-8, h_dev);
        const Matrix hs = narrow.system.hamiltonian();
        const double comm = max_abs(hs * h_generic - h_generic * hs);
        report("narrow.lamb_shift_commutes", comm < 1e-10, comm);
        std::mt19937_64 rng(11);
        const Matrix rho = random_density(narrow.system.dim(), rng);
        const double d_dev =
            max_abs(map.dissipator(rho) - narrow_dissipator(*eig, ens, rho));
        report("narrow.dissipator_reduction", d_dev < 1e-8, d_dev);
    }

    os << (all_ok ? "VERIFY OK" : "VERIFY FAILED") << "\n";
    return all_ok ? 0 : 2;
}

int run_command(const std::string& name, const RunnerOptions& opt) {
    try {
        const ExperimentConfig cfg = ExperimentConfig::load(opt.config_path);
        for (const auto& warn : cfg.warnings) std::cerr << "warning: " << warn << "\n";
        if (name == "smatrix") return cmd_smatrix(cfg, opt);
        if (name == "collide") return cmd_collide(cfg, opt);
        if (name == "response") return cmd_response(cfg, opt);
        if (name == "fdr") return cmd_fdr(cfg, opt);
        if (name == "sweep") return cmd_sweep(cfg, opt);
        if (name == "qme") return cmd_qme(cfg, opt);
        if (name == "verify") return cmd_verify(cfg, opt);
        std::cerr << "error: unknown command " << name << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace qscat
