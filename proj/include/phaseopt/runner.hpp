#pragma once

// Subcommand drivers behind the command-line tool. Each run writes its
// artifacts plus run.json (resolved config, seeds, input hashes) into one
// directory.

#include "phaseopt/io.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace phaseopt {

enum class OutputFormat { Json, Csv };

enum class Subcommand { Solve, Simulate, Sweep, Compare };

std::string_view to_string(Subcommand s);
Subcommand parse_subcommand(std::string_view name);

struct RunRequest {
    Subcommand subcommand = Subcommand::Solve;
    RunConfig config;
    /// Without sessions the built-in toy suite is used, each scenario with its
    /// own network; a c1 override still applies.
    std::optional<std::filesystem::path> sessions;
    std::optional<std::filesystem::path> config_path;
    std::optional<double> c1_override;
    std::filesystem::path out_dir = "phaseopt-run";
    OutputFormat format = OutputFormat::Json;
    bool dump_programs = false;
};

/// Exit codes returned by run().
inline constexpr int kExitOk = 0;
inline constexpr int kExitSolver = 1;  ///< solver failure or contract violation
inline constexpr int kExitInput = 2;   ///< bad config, data, or size limits

struct RunOutcome {
    int exit_code = kExitOk;
    std::string message;
    std::vector<std::filesystem::path> artifacts;
};

/// Never throws for data or solver problems; those become the exit code and
/// message. Artifacts written before a failure are kept.
RunOutcome run(const RunRequest& request);

}  // namespace phaseopt
