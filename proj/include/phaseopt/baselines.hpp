#pragma once

// Comparison phase strategies and schedule metrics.

#include "phaseopt/model.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace phaseopt {

enum class Strategy {
    EvDeclared,     ///< phase recorded with the session
    UniformRandom,  ///< iid uniform over {ab, bc, ca}
    RoundRobin,     ///< ab, bc, ca, ... in arrival order, ties by id
    Worst,          ///< everything on ab
};

inline constexpr std::array<Strategy, 4> kStrategies{Strategy::EvDeclared, Strategy::UniformRandom,
                                                     Strategy::RoundRobin, Strategy::Worst};

/// Short names: "ev", "uni", "rrb", "wst".
std::string_view to_string(Strategy s);
/// Accepts the short names and "ev_declared", "uniform_random", "round_robin", "worst".
Strategy parse_strategy(std::string_view name);

/// Throws DataError for EvDeclared when any session lacks a declared phase.
PhaseSelection baseline_phases(const Fleet& fleet, Strategy strategy, std::uint64_t seed = 0);

struct MetricsReport {
    double delivered_kwh = 0.0;
    Eigen::VectorXd delivered_per_ev;
    double demanded_kwh = 0.0;
    double unmet_kwh = 0.0;
    double satisfaction_rate = 1.0;  ///< 1 when nothing is demanded
    std::array<double, 3> per_phase_energy{0.0, 0.0, 0.0};
    double cost = 0.0;
    std::optional<double> average_price;  ///< unset without a price or delivery
    double peak_line_load = 0.0;          ///< max of |[phi1; phi2] X A|
};

/// Throws DimensionError on shape or price-length mismatch.
MetricsReport evaluate(const ChargingSchedule& schedule, const PhaseSelection& phases, const Fleet& fleet,
                       const NetworkSpec& spec, const std::optional<Eigen::VectorXd>& price = std::nullopt);

nlohmann::json to_json(const MetricsReport& report);

/// Column names matching metrics_csv_values.
std::vector<std::string> metrics_csv_columns();
std::vector<std::string> metrics_csv_values(const MetricsReport& report);

}  // namespace phaseopt
