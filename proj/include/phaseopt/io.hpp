#pragma once

// Session files, run configuration and small file helpers.
//
// Session records are JSON lines
//   {"id": "...", "arrival_hours": 7.5, "duration_hours": 3.2, "energy_kwh": 9.1, "declared_phase": "bc"}
// or a CSV file with a header naming the same columns. Hours become steps with
// arrival = floor(a / dt) and duration = ceil(d / dt).

#include "phaseopt/conic.hpp"
#include "phaseopt/model.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace phaseopt {

inline constexpr int kSchemaVersion = 1;

struct SessionRecord {
    std::string id;
    double arrival_hours = 0.0;
    double duration_hours = 0.0;
    double energy_kwh = 0.0;
    std::optional<Phase> declared_phase;
};

struct IngestOptions {
    double step_hours = 0.2;
    double episode_hours = 24.0;
    /// Split sessions that run past the end of their day into the next day,
    /// energy shared pro-rata by duration. Otherwise the horizon clips them.
    bool split_midnight = true;
};

struct IngestResult {
    std::vector<Fleet> episodes;  ///< one per day, at least one
    std::vector<std::string> warnings;
};

/// Reads JSON lines, or CSV when the extension is .csv. Throws DataError
/// naming the line of a malformed record.
std::vector<SessionRecord> read_session_records(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
std::vector<SessionRecord> parse_session_jsonl(std::istream& in, std::vector<std::string>* warnings = nullptr);
std::vector<SessionRecord> parse_session_csv(std::istream& in, std::vector<std::string>* warnings = nullptr);

/// Converts records to episodes; sessions inside an episode are ordered by
/// (arrival, id).
IngestResult build_episodes(const std::vector<SessionRecord>& records, const IngestOptions& opts);

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& opts = {});

/// Native JSON-lines form of a fleet (hours = steps * step_hours).
void write_sessions_jsonl(const Fleet& fleet, std::ostream& out);

/// One value per entry of a JSON array, or one number per line (CSV/text).
Eigen::VectorXd read_price_file(const std::filesystem::path& path);

enum class ConstraintChoice { MTilde, Identity, Rate, Full };

struct RunConfig {
    NetworkSpec network;
    double horizon_hours = 24.0;
    int max_steps = 2000;
    std::string algorithm = "pxa";  ///< pxa | bfsocp | sa | baseline:<ev|uni|rrb|wst>
    ConstraintChoice constraint = ConstraintChoice::MTilde;
    std::size_t full_cap = kDefaultSelectionCap;
    std::vector<std::uint64_t> seeds{0};
    ToleranceConfig tolerances;
    double bnb_gap = 1e-6;
    double integrality_tol = 1e-6;
    std::size_t node_limit = 1'000'000;
    int sa_iterations = 10000;
    std::size_t bfsocp_cap = 6561;
    bool online = true;        ///< simulate: reveal at arrival
    bool quick_charge = true;  ///< simulate: quick-charge weights
    bool split_midnight = true;
    std::vector<double> sweep_c1;  ///< empty means a default grid
    std::optional<std::string> price_file;

    /// Throws InvalidParameter for bad values, including a step count that is
    /// not an integer or exceeds max_steps.
    void validate() const;
    int horizon_steps() const;
};

/// Unknown keys are reported in `warnings` and otherwise ignored.
RunConfig parse_run_config(const nlohmann::json& j, std::vector<std::string>* warnings = nullptr);
RunConfig load_run_config(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);
nlohmann::json to_json(const RunConfig& cfg);

std::string_view to_string(ConstraintChoice c);
ConstraintChoice parse_constraint_choice(std::string_view name);
SelectionConstraint build_constraint(ConstraintChoice c, const Fleet& fleet, const NetworkSpec& spec,
                                     std::size_t cap = kDefaultSelectionCap);

/// 64-bit FNV-1a of the file bytes, as 16 hex digits.
std::string fnv1a_file(const std::filesystem::path& path);
std::string fnv1a(std::string_view bytes);

}  // namespace phaseopt
