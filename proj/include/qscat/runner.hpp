// runner.hpp — experiment orchestration behind the CLI subcommands. Each
// command reads a parsed configuration, writes CSV files into the output
// directory and returns a process exit code (0 ok, 1 validation error,
// 2 numerical-invariant failure).

#pragma once

#include "qscat/config.hpp"

#include <optional>
#include <string>

namespace qscat {

struct RunnerOptions {
    std::string config_path;
    std::string out_dir = ".";
    std::optional<std::uint64_t> seed;
    bool oracle = false;
    std::optional<std::size_t> grid_nodes;
};

int cmd_smatrix(const ExperimentConfig& cfg, const RunnerOptions& opt);
int cmd_collide(const ExperimentConfig& cfg, const RunnerOptions& opt);
int cmd_response(const ExperimentConfig& cfg, const RunnerOptions& opt);
int cmd_fdr(const ExperimentConfig& cfg, const RunnerOptions& opt);
int cmd_sweep(const ExperimentConfig& cfg, const RunnerOptions& opt);
int cmd_qme(const ExperimentConfig& cfg, const RunnerOptions& opt);
int cmd_verify(const ExperimentConfig& cfg, const RunnerOptions& opt);

// Loads the configuration and dispatches; maps exceptions onto exit codes.
int run_command(const std::string& name, const RunnerOptions& opt);

}  // namespace qscat
