#include "phaseopt/pxa.hpp"

#include "phaseopt/error.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <queue>
#include <random>
#include <string>

namespace phaseopt {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Eigen::VectorXd resolve_weights(const Eigen::VectorXd& w, int horizon) {
    if (w.size() == 0) return unit_weights(horizon);
    if (w.size() != horizon) throw DimensionError("weight vector length must equal T");
    if ((w.array() < 0.0).any()) throw InvalidParameter("weights must be nonnegative");
    return w;
}

std::vector<Phase> round_robin(int n) {
    std::vector<Phase> out(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = kPhases[static_cast<std::size_t>(i % 3)];
    return out;
}

struct Node {
    PartialAssignment pinned;
    double bound = -kInf;
    int depth = 0;
    std::size_t seq = 0;
};

struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
        if (a.bound != b.bound) return a.bound > b.bound;
        if (a.depth != b.depth) return a.depth < b.depth;
        return a.seq > b.seq;
    }
};

/// Relaxation objective of a fully pinned X, memoized by assignment.
class PinnedEvaluator {
public:
    PinnedEvaluator(const Fleet& fleet, const NetworkSpec& spec, const SelectionConstraint& constraint,
                    const ToleranceConfig& tol)
        : fleet_(fleet), spec_(spec), constraint_(constraint), tol_(tol) {}

    struct Entry {
        bool ok = false;
        double objective = kInf;
        AggregatePower power;
    };

    const Entry& operator()(const std::vector<Phase>& phases) {
        auto it = cache_.find(phases);
        if (it != cache_.end()) return it->second;
        PartialAssignment pinned(phases.begin(), phases.end());
        const RelaxedNode node = build_relaxed_node(fleet_, spec_, constraint_, pinned);
        const SolveResult res = solve_conic(node.program, tol_);
        ++solves;
        Entry e;
        if (res.optimal()) {
            e.ok = true;
            e.objective = res.objective;
            e.power = node.power(res.primal);
        }
        return cache_.emplace(phases, std::move(e)).first->second;
    }

    std::size_t solves = 0;

private:
    const Fleet& fleet_;
    const NetworkSpec& spec_;
    const SelectionConstraint& constraint_;
    ToleranceConfig tol_;
    std::map<std::vector<Phase>, Entry> cache_;
};

}  // namespace

void BnBConfig::validate() const {
    if (!(integrality_tol > 0.0) || !(gap_tol > 0.0)) throw InvalidParameter("B&B tolerances must be positive");
    if (node_limit < 1) throw InvalidParameter("node_limit must be at least 1");
}

std::string_view to_string(BnBStatus s) {
    switch (s) {
        case BnBStatus::Optimal: return "optimal";
        case BnBStatus::NodeLimit: return "node_limit";
        case BnBStatus::Infeasible: return "infeasible";
    }
    return "unknown";
}

std::vector<int> branching_order(const Fleet& fleet, BranchOrder order) {
    std::vector<int> idx(static_cast<std::size_t>(fleet.size()));
    std::iota(idx.begin(), idx.end(), 0);
    if (order == BranchOrder::LargestDemand) {
        std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
            const auto& sa = fleet[a];
            const auto& sb = fleet[b];
            if (sa.energy != sb.energy) return sa.energy > sb.energy;
            if (sa.arrival != sb.arrival) return sa.arrival < sb.arrival;
            return sa.id < sb.id;
        });
    }
    return idx;
}

BnBResult branch_and_bound(const Fleet& fleet, const NetworkSpec& spec, const SelectionConstraint& constraint,
                           const BnBConfig& cfg, const PartialAssignment& pinned_in) {
    cfg.validate();
    const int N = fleet.size();
    PartialAssignment root_pins = pinned_in.empty() ? PartialAssignment(static_cast<std::size_t>(N)) : pinned_in;
    if (static_cast<int>(root_pins.size()) != N) throw DimensionError("partial assignment length must equal N");
    constraint.validate(fleet.horizon(), N);

    PinnedEvaluator evaluate(fleet, spec, constraint, cfg.solver);
    BnBResult out;

    auto complete = [&](const PartialAssignment& pins, const std::vector<Phase>& fill) {
        std::vector<Phase> full(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) {
            const auto& p = pins[static_cast<std::size_t>(i)];
            full[static_cast<std::size_t>(i)] = p ? *p : fill[static_cast<std::size_t>(i)];
        }
        return full;
    };

    double incumbent = kInf;
    std::vector<Phase> best;
    AggregatePower best_power;
    auto offer = [&](const std::vector<Phase>& phases) {
        const auto& e = evaluate(phases);
        if (e.ok && e.objective < incumbent) {
            incumbent = e.objective;
            best = phases;
            best_power = e.power;
        }
    };
    offer(complete(root_pins, round_robin(N)));

    auto prune_level = [&]() { return incumbent - cfg.gap_tol * std::max(1.0, std::abs(incumbent)); };

    const std::vector<int> order = branching_order(fleet, cfg.branch_order);
    std::priority_queue<Node, std::vector<Node>, NodeOrder> heap;
    std::vector<Node> stack;
    std::size_t seq = 0;
    auto push = [&](Node n) {
        n.seq = seq++;
        if (cfg.node_selection == NodeSelection::BestBound) {
            heap.push(std::move(n));
        } else {
            stack.push_back(std::move(n));
        }
    };
    auto empty = [&]() { return cfg.node_selection == NodeSelection::BestBound ? heap.empty() : stack.empty(); };
    auto pop = [&]() {
        Node n;
        if (cfg.node_selection == NodeSelection::BestBound) {
            n = heap.top();
            heap.pop();
        } else {
            n = std::move(stack.back());
            stack.pop_back();
        }
        return n;
    };

    const bool any_free = std::any_of(root_pins.begin(), root_pins.end(), [](const auto& p) { return !p.has_value(); });
    if (any_free) push(Node{root_pins, -kInf, 0, 0});
    bool root_solved = false;
    bool root_infeasible = false;
    bool limit_hit = false;
    double open_bound = kInf;

    while (!empty()) {
        if (out.nodes >= cfg.node_limit) {
            limit_hit = true;
            break;
        }
        Node node = pop();
        if (node.bound >= prune_level()) continue;

        const RelaxedNode relaxed = build_relaxed_node(fleet, spec, constraint, node.pinned);
        const SolveResult res = solve_conic(relaxed.program, cfg.solver);
        ++out.nodes;
        ++evaluate.solves;
        if (!root_solved) {
            root_solved = true;
            if (res.status == SolveStatus::Infeasible) root_infeasible = true;
        }
        if (!res.optimal()) {
            if (res.status != SolveStatus::Infeasible) {
                throw SolverError("node relaxation failed: " + std::string(to_string(res.status)));
            }
            continue;
        }
        if (res.objective >= prune_level()) continue;

        const Eigen::MatrixXd sel = relaxed.selection(res.primal, node.pinned);
        std::vector<Phase> rounded(static_cast<std::size_t>(N));
        int branch_ev = -1;
        for (int i : order) {
            Eigen::Index arg = 0;
            const double top = sel.col(i).maxCoeff(&arg);
            rounded[static_cast<std::size_t>(i)] = kPhases[static_cast<std::size_t>(arg)];
            if (branch_ev < 0 && !node.pinned[static_cast<std::size_t>(i)] && std::abs(1.0 - top) > cfg.integrality_tol) {
                branch_ev = i;
            }
        }
        const std::vector<Phase> candidate = complete(node.pinned, rounded);
        offer(candidate);
        if (branch_ev < 0) continue;  // integral: the rounded X is this node's optimum

        const bool any_pinned = std::any_of(node.pinned.begin(), node.pinned.end(), [](const auto& p) { return p.has_value(); });
        // With nothing pinned every solution has a cyclic relabeling with this EV on ab.
        const int branches = any_pinned ? 3 : 1;
        std::vector<Node> children;
        for (int b = 0; b < branches; ++b) {
            Node child{node.pinned, res.objective, node.depth + 1, 0};
            child.pinned[static_cast<std::size_t>(branch_ev)] = kPhases[static_cast<std::size_t>(b)];
            children.push_back(std::move(child));
        }
        if (cfg.node_selection == NodeSelection::DepthFirst) std::reverse(children.begin(), children.end());
        for (auto& c : children) push(std::move(c));
    }

    while (!empty()) open_bound = std::min(open_bound, pop().bound);

    out.solves = evaluate.solves;
    if (root_infeasible || !std::isfinite(incumbent)) {
        out.status = BnBStatus::Infeasible;
        return out;
    }
    out.phases = PhaseSelection(best);
    out.power = best_power;
    out.objective = incumbent;
    out.best_bound = std::min(incumbent, open_bound);
    out.gap = (incumbent - out.best_bound) / std::max(1.0, std::abs(incumbent));
    out.status = limit_hit && out.gap > cfg.gap_tol ? BnBStatus::NodeLimit : BnBStatus::Optimal;
    return out;
}

ChargingSchedule reconstruct_schedule_zero_laxity(const AggregatePower& p, const PhaseSelection& x,
                                                  const Fleet& fleet, double tol) {
    const int N = fleet.size();
    const int T = fleet.horizon();
    if (x.size() != N) throw DimensionError("phase selection length must equal N");
    if (p.power.rows() != 3 || p.power.cols() != T) throw DimensionError("P must be 3 x T");
    const Eigen::MatrixXd e = build_presence(fleet);

    ChargingSchedule a{Eigen::MatrixXd::Zero(N, T)};
    for (int t = 0; t < T; ++t) {
        std::array<int, 3> present{0, 0, 0};
        for (int i = 0; i < N; ++i) {
            if (e(i, t) > 0.0) ++present[static_cast<std::size_t>(index(x[i]))];
        }
        for (int m = 0; m < 3; ++m) {
            if (present[static_cast<std::size_t>(m)] == 0 && p.power(m, t) > tol) {
                throw DataError("no EV present on phase " + std::string(to_string(kPhases[static_cast<std::size_t>(m)])) +
                                " at step " + std::to_string(t) + " to carry P = " + std::to_string(p.power(m, t)));
            }
        }
        for (int i = 0; i < N; ++i) {
            if (e(i, t) == 0.0) continue;
            const int m = index(x[i]);
            a.power(i, t) = std::max(0.0, p.power(m, t)) / present[static_cast<std::size_t>(m)];
        }
    }
    return a;
}

PxaSolution pxa(const Fleet& fleet, const NetworkSpec& spec, const SelectionConstraint& constraint,
                const PxaConfig& cfg) {
    const auto start = std::chrono::steady_clock::now();
    const Eigen::VectorXd w = resolve_weights(cfg.weights, fleet.horizon());

    const BnBResult bnb = branch_and_bound(fleet, spec, constraint, cfg.bnb);
    if (bnb.status == BnBStatus::Infeasible) throw SolverError("phase relaxation is infeasible");

    PxaSolution sol;
    sol.phases = bnb.phases;
    sol.relaxation_objective = bnb.objective;
    sol.bnb_status = bnb.status;
    sol.gap = bnb.gap;
    sol.node_count = bnb.nodes;

    bool done = false;
    if (cfg.zero_laxity_reconstruction && is_zero_laxity(fleet, spec)) {
        try {
            ChargingSchedule a = reconstruct_schedule_zero_laxity(bnb.power, bnb.phases, fleet);
            if (check_feasibility(bnb.phases, a, fleet, spec).feasible) {
                sol.schedule = std::move(a);
                sol.reconstructed = true;
                done = true;
            }
        } catch (const DataError&) {
            // fall through to SOCP(X)
        }
    }
    if (!done) {
        const FixedPhaseResult r = solve_fixed_phase(bnb.phases, fleet, spec, w, cfg.socp);
        if (r.status == SolveStatus::Infeasible) throw ContractError("SOCP(X) infeasible for the selected phases");
        if (!r.optimal()) throw SolverError("SOCP(X) failed: " + std::string(to_string(r.status)));
        sol.schedule = r.schedule;
    }
    sol.final_objective = objective_value(sol.schedule, unit_weights(fleet.horizon()));
    sol.weighted_objective = objective_value(sol.schedule, w);
    sol.wall_time_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return sol;
}

void check_enumeration_size(int n, std::size_t cap) {
    if (n < 0) throw InvalidParameter("fleet size must be nonnegative");
    std::size_t count = 1;
    for (int i = 0; i < n; ++i) {
        if (count > cap / 3) {
            throw SizeError("3^" + std::to_string(n) + " phase assignments exceed the cap of " + std::to_string(cap));
        }
        count *= 3;
    }
    if (count > cap) {
        throw SizeError("3^" + std::to_string(n) + " = " + std::to_string(count) + " phase assignments exceed the cap of " +
                        std::to_string(cap));
    }
}

BfsocpResult bfsocp(const Fleet& fleet, const NetworkSpec& spec, const BfsocpConfig& cfg) {
    const int N = fleet.size();
    check_enumeration_size(N, cfg.max_assignments);
    const Eigen::VectorXd w = resolve_weights(cfg.weights, fleet.horizon());

    BfsocpResult out;
    out.objective = kInf;
    std::vector<int> digits(static_cast<std::size_t>(N), 0);
    while (true) {
        std::vector<Phase> phases(static_cast<std::size_t>(N));
        for (int i = 0; i < N; ++i) phases[static_cast<std::size_t>(i)] = kPhases[static_cast<std::size_t>(digits[static_cast<std::size_t>(i)])];
        const PhaseSelection x(phases);
        const FixedPhaseResult r = solve_fixed_phase(x, fleet, spec, w, cfg.solver);
        ++out.solves;
        if (!r.optimal()) throw SolverError("SOCP(X) failed: " + std::string(to_string(r.status)));
        if (r.objective < out.objective) {
            out.objective = r.objective;
            out.phases = x;
            out.schedule = r.schedule;
        }
        // Odometer with the last EV varying fastest.
        int pos = N - 1;
        while (pos >= 0 && digits[static_cast<std::size_t>(pos)] == 2) digits[static_cast<std::size_t>(pos--)] = 0;
        if (pos < 0) break;
        ++digits[static_cast<std::size_t>(pos)];
    }
    return out;
}

SaResult simulated_annealing(const Fleet& fleet, const NetworkSpec& spec, const SaConfig& cfg) {
    if (cfg.iterations < 1) throw InvalidParameter("simulated annealing needs at least one iteration");
    const int N = fleet.size();
    const Eigen::VectorXd w = resolve_weights(cfg.weights, fleet.horizon());

    SaResult out;
    std::map<std::vector<Phase>, double> memo;
    auto energy = [&](const std::vector<Phase>& phases) {
        auto it = memo.find(phases);
        if (it != memo.end()) return it->second;
        const FixedPhaseResult r = solve_fixed_phase(PhaseSelection(phases), fleet, spec, w, cfg.solver);
        if (!r.optimal()) throw SolverError("SOCP(X) failed: " + std::string(to_string(r.status)));
        ++out.solves;
        memo.emplace(phases, r.objective);
        return r.objective;
    };

    std::mt19937_64 rng(cfg.seed);
    std::uniform_int_distribution<int> pick_phase(0, 2);
    auto random_assignment = [&]() {
        std::vector<Phase> p(static_cast<std::size_t>(N));
        for (auto& v : p) v = kPhases[static_cast<std::size_t>(pick_phase(rng))];
        return p;
    };

    std::vector<Phase> current = random_assignment();
    double current_e = energy(current);

    double t0 = 0.0;
    if (cfg.initial_temperature) {
        t0 = *cfg.initial_temperature;
        if (t0 < 0.0) throw InvalidParameter("initial temperature must be nonnegative");
    } else if (N > 0) {
        std::vector<double> samples;
        for (int k = 0; k < 20; ++k) samples.push_back(energy(random_assignment()));
        const double mean = std::accumulate(samples.begin(), samples.end(), 0.0) / samples.size();
        double var = 0.0;
        for (double s : samples) var += (s - mean) * (s - mean);
        t0 = std::sqrt(var / samples.size());
    }
    const double gamma = std::pow(1e-3, 1.0 / cfg.iterations);

    std::vector<Phase> best = current;
    double best_e = current_e;
    out.best_trace.push_back(best_e);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    double temperature = t0;
    for (int k = 1; k < cfg.iterations; ++k) {
        if (N == 0) {
            out.best_trace.push_back(best_e);
            continue;
        }
        std::uniform_int_distribution<int> pick_ev(0, N - 1);
        std::vector<Phase> proposal = current;
        proposal[static_cast<std::size_t>(pick_ev(rng))] = kPhases[static_cast<std::size_t>(pick_phase(rng))];
        const double e = energy(proposal);
        const double delta = e - current_e;
        bool accept = delta <= 0.0;
        if (!accept && temperature > 0.0) accept = unit(rng) < std::exp(-delta / temperature);
        if (accept) {
            current = std::move(proposal);
            current_e = e;
            if (current_e < best_e) {
                best_e = current_e;
                best = current;
            }
        }
        out.best_trace.push_back(best_e);
        temperature *= gamma;
    }
    out.phases = PhaseSelection(best);
    out.objective = best_e;
    return out;
}

}  // namespace phaseopt
