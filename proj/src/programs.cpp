#include "phaseopt/programs.hpp"

#include "phaseopt/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>

namespace phaseopt {

namespace {

void add_line_cones(ConicProgram& prog, const PhasorPair& phasors, const NetworkSpec& spec,
                    const std::vector<std::vector<std::pair<int, Phase>>>& contributors) {
    const auto stacked = phasors.stacked();
    const auto limits = spec.line_limits();
    for (const auto& step : contributors) {
        if (step.empty()) continue;
        for (int line = 0; line < 6; ++line) {
            SocConstraint cone;
            cone.bound = limits(line);
            for (const auto& [var, phase] : step) {
                const std::complex<double> coef = stacked(line, index(phase));
                if (coef.real() != 0.0) cone.u.terms.emplace_back(var, coef.real());
                if (coef.imag() != 0.0) cone.v.terms.emplace_back(var, coef.imag());
            }
            if (!cone.u.terms.empty() || !cone.v.terms.empty()) prog.cones.push_back(std::move(cone));
        }
    }
}

}  // namespace

ConicProgram build_socp_fixed_phase(const PhaseSelection& x, const Fleet& fleet, const NetworkSpec& spec,
                                    const Eigen::VectorXd& weights) {
    spec.validate();
    const int N = fleet.size();
    const int T = fleet.horizon();
    if (x.size() != N) throw DimensionError("phase selection length must equal N");
    if (weights.size() != T) throw DimensionError("weight vector length must equal T");
    const double dt = fleet.step_hours();

    ConicProgram prog(N * T);
    prog.lower.setZero();
    prog.upper.setZero();
    std::vector<std::vector<std::pair<int, Phase>>> contributors(static_cast<std::size_t>(T));
    for (int i = 0; i < N; ++i) {
        const auto& s = fleet[i];
        if (s.energy <= 0.0) continue;
        LinearConstraint demand;
        for (int t = s.arrival; t < s.departure(); ++t) {
            const int var = i * T + t;
            prog.upper(var) = spec.r_max;
            prog.objective(var) = -weights(t);
            demand.terms.emplace_back(var, dt);
            contributors[static_cast<std::size_t>(t)].emplace_back(var, x[i]);
        }
        if (demand.terms.empty()) continue;
        demand.rhs = s.energy;
        prog.inequalities.push_back(std::move(demand));
    }
    add_line_cones(prog, build_phasors(spec.n_r), spec, contributors);
    return prog;
}

FixedPhaseResult solve_fixed_phase(const PhaseSelection& x, const Fleet& fleet, const NetworkSpec& spec,
                                   const Eigen::VectorXd& weights, const ToleranceConfig& tol) {
    const int N = fleet.size();
    const int T = fleet.horizon();
    const ConicProgram prog = build_socp_fixed_phase(x, fleet, spec, weights);
    const SolveResult res = solve_conic(prog, tol);

    FixedPhaseResult out;
    out.status = res.status;
    out.residual = res.residual;
    out.iterations = res.iterations;
    out.schedule.power = Eigen::MatrixXd::Zero(N, T);
    if (!res.optimal()) return out;

    for (int i = 0; i < N; ++i) {
        for (int t = 0; t < T; ++t) {
            const int var = i * T + t;
            out.schedule.power(i, t) = std::clamp(res.primal(var), prog.lower(var), prog.upper(var));
        }
        const double delivered = out.schedule.power.row(i).sum() * fleet.step_hours();
        if (delivered > fleet[i].energy) {
            out.schedule.power.row(i) *= delivered > 0.0 ? fleet[i].energy / delivered : 0.0;
        }
    }
    out.objective = objective_value(out.schedule, weights);
    return out;
}

AggregatePower RelaxedNode::power(const Eigen::VectorXd& x) const {
    AggregatePower p{Eigen::MatrixXd::Zero(3, horizon)};
    for (int m = 0; m < 3; ++m)
        for (int t = 0; t < horizon; ++t) p.power(m, t) = std::max(0.0, x(m * horizon + t));
    return p;
}

Eigen::MatrixXd RelaxedNode::selection(const Eigen::VectorXd& x, const PartialAssignment& pinned) const {
    Eigen::MatrixXd sel = Eigen::MatrixXd::Zero(3, fleet_size);
    for (int i = 0; i < fleet_size; ++i) {
        const auto& p = pinned[static_cast<std::size_t>(i)];
        if (p) sel(index(*p), i) = 1.0;
    }
    const int base = 3 * horizon;
    for (std::size_t j = 0; j < free_evs.size(); ++j) {
        for (int m = 0; m < 3; ++m) sel(m, free_evs[j]) = x(base + 3 * static_cast<int>(j) + m);
    }
    return sel;
}

RelaxedNode build_relaxed_node(const Fleet& fleet, const NetworkSpec& spec, const SelectionConstraint& constraint,
                               const PartialAssignment& pinned) {
    spec.validate();
    const int N = fleet.size();
    const int T = fleet.horizon();
    constraint.validate(T, N);
    if (static_cast<int>(pinned.size()) != N) throw DimensionError("partial assignment length must equal N");

    RelaxedNode node;
    node.horizon = T;
    node.fleet_size = N;
    for (int i = 0; i < N; ++i) {
        if (!pinned[static_cast<std::size_t>(i)]) node.free_evs.push_back(i);
    }
    const int nfree = static_cast<int>(node.free_evs.size());
    const int base = 3 * T;
    ConicProgram& prog = node.program;
    prog = ConicProgram(base + 3 * nfree);
    prog.lower.setZero();
    for (int v = 0; v < base; ++v) prog.objective(v) = -1.0;
    for (int v = base; v < prog.num_variables(); ++v) prog.upper(v) = 1.0;
    for (int j = 0; j < nfree; ++j) {
        prog.equalities.push_back({{{base + 3 * j, 1.0}, {base + 3 * j + 1, 1.0}, {base + 3 * j + 2, 1.0}}, 1.0});
    }

    // One row block per distinct selection column.
    std::map<std::vector<int>, int> seen;
    Eigen::MatrixXd upper = Eigen::MatrixXd::Constant(3, T, std::numeric_limits<double>::infinity());
    for (int k = 0; k < constraint.columns(); ++k) {
        std::vector<int> steps;
        for (int t = 0; t < T; ++t) {
            if (constraint.m(t, k) == 1.0) steps.push_back(t);
        }
        if (!seen.emplace(steps, k).second) continue;

        std::array<double, 3> pinned_rhs{0.0, 0.0, 0.0};
        double free_total = 0.0;
        for (int i = 0; i < N; ++i) {
            const double wik = constraint.w(i, k);
            const auto& p = pinned[static_cast<std::size_t>(i)];
            if (p) {
                pinned_rhs[static_cast<std::size_t>(index(*p))] += wik;
            } else {
                free_total += wik;
            }
        }
        for (int m = 0; m < 3; ++m) {
            LinearConstraint row;
            for (int t : steps) row.terms.emplace_back(m * T + t, 1.0);
            for (int j = 0; j < nfree; ++j) {
                const double wik = constraint.w(node.free_evs[static_cast<std::size_t>(j)], k);
                if (wik != 0.0) row.terms.emplace_back(base + 3 * j + m, -wik);
            }
            row.rhs = pinned_rhs[static_cast<std::size_t>(m)];
            prog.inequalities.push_back(std::move(row));
            // Implied bound: each P(m, t) in the column is at most the column's capacity.
            const double cap = pinned_rhs[static_cast<std::size_t>(m)] + free_total;
            for (int t : steps) upper(m, t) = std::min(upper(m, t), cap);
        }
    }
    for (int m = 0; m < 3; ++m)
        for (int t = 0; t < T; ++t) prog.upper(m * T + t) = upper(m, t);

    std::vector<std::vector<std::pair<int, Phase>>> contributors(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
        for (Phase ph : kPhases) {
            if (upper(index(ph), t) > 0.0) contributors[static_cast<std::size_t>(t)].emplace_back(index(ph) * T + t, ph);
        }
    }
    add_line_cones(prog, build_phasors(spec.n_r), spec, contributors);
    return node;
}

}  // namespace phaseopt
