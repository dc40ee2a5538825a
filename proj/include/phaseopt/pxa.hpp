#pragma once

// Phase selection algorithms: branch-and-bound on the (P, X) relaxation,
// the two-step PXA solver, the exhaustive BFSOCP oracle and simulated
// annealing.

#include "phaseopt/conic.hpp"
#include "phaseopt/model.hpp"
#include "phaseopt/programs.hpp"

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace phaseopt {

enum class NodeSelection { BestBound, DepthFirst };

enum class BranchOrder {
    LargestDemand,  ///< descending energy, then arrival, then id
    Index,          ///< fleet order
};

struct BnBConfig {
    NodeSelection node_selection = NodeSelection::BestBound;
    BranchOrder branch_order = BranchOrder::LargestDemand;
    double integrality_tol = 1e-6;
    double gap_tol = 1e-6;  ///< relative, against max(1, |incumbent|)
    std::size_t node_limit = 1'000'000;
    ToleranceConfig solver;

    void validate() const;
};

enum class BnBStatus { Optimal, NodeLimit, Infeasible };

std::string_view to_string(BnBStatus s);

struct BnBResult {
    BnBStatus status = BnBStatus::Infeasible;
    PhaseSelection phases;
    AggregatePower power;      ///< relaxation P for the returned phases
    double objective = 0.0;    ///< p*_2: relaxation objective of `phases`
    double best_bound = 0.0;   ///< lower bound over the unexplored tree
    double gap = 0.0;          ///< (objective - best_bound) / max(1, |objective|)
    std::size_t nodes = 0;     ///< tree nodes whose relaxation was solved
    std::size_t solves = 0;    ///< all conic solves, heuristics included
};

/// Minimizes -sum(P) over integral X. `pinned` may fix some phases up front
/// (empty means none). Root infeasibility yields status Infeasible.
BnBResult branch_and_bound(const Fleet& fleet, const NetworkSpec& spec, const SelectionConstraint& constraint,
                           const BnBConfig& cfg, const PartialAssignment& pinned = {});

struct PxaConfig {
    BnBConfig bnb;
    Eigen::VectorXd weights;  ///< SOCP(X) weights; empty means all ones
    /// For zero-laxity fleets, split P over present EVs instead of re-solving
    /// SOCP(X). Falls back to SOCP(X) if the split fails the feasibility check.
    bool zero_laxity_reconstruction = false;
    ToleranceConfig socp;
};

struct PxaSolution {
    PhaseSelection phases;
    ChargingSchedule schedule;
    double relaxation_objective = 0.0;  ///< p*_2
    double final_objective = 0.0;       ///< f_1(A)
    double weighted_objective = 0.0;    ///< f_w(A) for the configured weights
    BnBStatus bnb_status = BnBStatus::Optimal;
    double gap = 0.0;
    std::size_t node_count = 0;
    double wall_time_ms = 0.0;
    bool reconstructed = false;
};

/// Step 1: branch-and-bound for X. Step 2: SOCP(X) for A.
/// Throws ContractError if SOCP(X) reports infeasible, SolverError on any
/// other solver failure.
PxaSolution pxa(const Fleet& fleet, const NetworkSpec& spec, const SelectionConstraint& constraint,
                const PxaConfig& cfg = {});

/// A(i, t) = P(m, t) / n_m(t) for EV i on phase m, where n_m(t) counts the
/// EVs on m that are present at t. Throws DataError when P(m, t) > 0 but no
/// EV on m is present.
ChargingSchedule reconstruct_schedule_zero_laxity(const AggregatePower& p, const PhaseSelection& x,
                                                  const Fleet& fleet, double tol = 1e-9);

struct BfsocpConfig {
    std::size_t max_assignments = 6561;  ///< 3^8
    Eigen::VectorXd weights;             ///< empty means all ones
    ToleranceConfig solver;
};

struct BfsocpResult {
    PhaseSelection phases;
    ChargingSchedule schedule;
    double objective = 0.0;  ///< p*_1 under the configured weights
    std::size_t solves = 0;
};

/// Throws SizeError when 3^n exceeds cap.
void check_enumeration_size(int n, std::size_t cap);

/// Solves SOCP(X) for every X in lexicographic order and keeps the first best.
BfsocpResult bfsocp(const Fleet& fleet, const NetworkSpec& spec, const BfsocpConfig& cfg = {});

struct SaConfig {
    int iterations = 10000;  ///< evaluated states, the initial one included
    std::uint64_t seed = 0;
    Eigen::VectorXd weights;  ///< empty means all ones
    /// Overrides the automatic T0 (stdev of 20 random objectives). 0 is greedy.
    std::optional<double> initial_temperature;
    ToleranceConfig solver;
};

struct SaResult {
    PhaseSelection phases;
    double objective = 0.0;
    std::vector<double> best_trace;  ///< best objective after each iteration
    std::size_t solves = 0;          ///< distinct SOCP(X) solves
};

SaResult simulated_annealing(const Fleet& fleet, const NetworkSpec& spec, const SaConfig& cfg = {});

/// EV indices in branching order.
std::vector<int> branching_order(const Fleet& fleet, BranchOrder order);

}  // namespace phaseopt
