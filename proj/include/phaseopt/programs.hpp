#pragma once

// Conic programs built from the charging model: the fixed-phase schedule
// problem and the continuous relaxation of the phase-selection MISOCP.

#include "phaseopt/conic.hpp"
#include "phaseopt/model.hpp"

#include <optional>
#include <vector>

namespace phaseopt {

/// Phase per EV, or nullopt where the phase is still free.
using PartialAssignment = std::vector<std::optional<Phase>>;

/// SOCP(X). Variable (i, t) of the N x T schedule sits at index i * T + t.
/// Objective is -sum_i sum_t A(i,t) w_t.
ConicProgram build_socp_fixed_phase(const PhaseSelection& x, const Fleet& fleet, const NetworkSpec& spec,
                                    const Eigen::VectorXd& weights);

struct FixedPhaseResult {
    SolveStatus status = SolveStatus::NumericalFailure;
    ChargingSchedule schedule;
    double objective = 0.0;  ///< f_w of the returned schedule
    double residual = 0.0;   ///< solver-side primal violation before clipping
    int iterations = 0;

    bool optimal() const { return status == SolveStatus::Optimal; }
};

/// Builds and solves SOCP(X). The returned schedule is clipped into the
/// charger box and each EV's row is scaled down to its demand where solver
/// round-off overshoots it.
FixedPhaseResult solve_fixed_phase(const PhaseSelection& x, const Fleet& fleet, const NetworkSpec& spec,
                                   const Eigen::VectorXd& weights, const ToleranceConfig& tol = {});

/// Continuous node relaxation of  min -sum(P)  s.t.  P M <= X W,
/// |[phi1; phi2] P| <= C_max,  P >= 0,  X columns on the simplex.
///
/// Layout: P(m, t) at m * T + t, then three entries per free EV
/// (ordered as in `free_evs`) holding X(ab), X(bc), X(ca).
/// Pinned EVs contribute constants on the right-hand side; duplicate
/// selection columns are emitted once.
struct RelaxedNode {
    ConicProgram program;
    std::vector<int> free_evs;
    int horizon = 0;
    int fleet_size = 0;

    AggregatePower power(const Eigen::VectorXd& x) const;
    /// Full 3 x N selection: pinned columns one-hot, free columns from x.
    Eigen::MatrixXd selection(const Eigen::VectorXd& x, const PartialAssignment& pinned) const;
};

RelaxedNode build_relaxed_node(const Fleet& fleet, const NetworkSpec& spec, const SelectionConstraint& constraint,
                               const PartialAssignment& pinned);

}  // namespace phaseopt
