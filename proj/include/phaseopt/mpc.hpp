#pragma once

// Receding-horizon controller: sessions are revealed at their arrival, phases
// of connected EVs stay fixed, and each step re-solves the phase relaxation
// and SOCP(X) over the remaining window, executing only the first column.

#include "phaseopt/model.hpp"
#include "phaseopt/programs.hpp"
#include "phaseopt/pxa.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace phaseopt {

enum class RevealMode {
    Online,           ///< a session becomes visible at its arrival step
    FullInformation,  ///< everything is visible at t = 0
};

enum class WeightKind { QuickCharge, Unit };

using ConstraintBuilder = std::function<SelectionConstraint(const Fleet&, const NetworkSpec&)>;

struct MpcConfig {
    RevealMode reveal = RevealMode::Online;
    WeightKind weights = WeightKind::QuickCharge;
    ConstraintBuilder constraint = m_tilde_constraint;
    BnBConfig bnb;
    ToleranceConfig socp;
};

/// D(t) row for one EV: the remaining window and residual energy.
struct ResidualProfile {
    int arrival = 0;
    int duration = 0;
    double energy = 0.0;
};

struct SimState {
    int clock = 0;
    std::vector<ResidualProfile> profiles;
    std::vector<std::optional<Phase>> committed;  ///< X_old; entries are set once
    std::vector<bool> revealed;
    Eigen::MatrixXd delivered;  ///< N x T executed power

    static SimState initial(const Fleet& fleet);
};

struct StepRecord {
    int t = 0;
    std::vector<std::string> revealed_ids;
    std::vector<std::pair<std::string, Phase>> decisions;
    Eigen::VectorXd executed;  ///< length N, kW
    double objective = 0.0;    ///< SOCP(X) objective over the remaining window
    double solve_ms = 0.0;
    std::size_t nodes = 0;
    bool failed = false;
    std::string failure;
};

/// Indices of sessions with arrival <= t that `revealed` has not marked yet.
std::vector<int> reveal(const Fleet& fleet, int t, const std::vector<bool>& revealed);

/// Advances `state` by one step. Solver failures are caught and recorded;
/// the step then executes zero power.
StepRecord mpc_step(SimState& state, const Fleet& fleet, const NetworkSpec& spec, const MpcConfig& cfg = {});

struct EpisodeResult {
    ChargingSchedule delivered;
    std::vector<std::optional<Phase>> phases;
    std::vector<StepRecord> steps;
    Eigen::VectorXd residual_energy;
    int failed_steps = 0;

    std::vector<double> step_ms() const;
    std::vector<double> objective_trace() const;
    double delivered_energy(double step_hours) const;
    /// Committed phases; EVs that never received one are reported as ab.
    PhaseSelection selection() const;
};

EpisodeResult run_episode(const Fleet& fleet, const NetworkSpec& spec, const MpcConfig& cfg = {});

/// One JSON object per step: t, revealed, decisions, executed, objective, solve_ms.
std::string to_json_line(const StepRecord& step, const Fleet& fleet);

}  // namespace phaseopt
