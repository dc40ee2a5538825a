#include "phaseopt/mpc.hpp"

#include "phaseopt/error.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>

namespace phaseopt {

SimState SimState::initial(const Fleet& fleet) {
    SimState s;
    const auto n = static_cast<std::size_t>(fleet.size());
    s.profiles.reserve(n);
    for (const auto& session : fleet.sessions()) s.profiles.push_back({session.arrival, session.duration, session.energy});
    s.committed.assign(n, std::nullopt);
    s.revealed.assign(n, false);
    s.delivered = Eigen::MatrixXd::Zero(fleet.size(), fleet.horizon());
    return s;
}

std::vector<int> reveal(const Fleet& fleet, int t, const std::vector<bool>& revealed) {
    std::vector<int> out;
    for (int i = 0; i < fleet.size(); ++i) {
        if (!revealed[static_cast<std::size_t>(i)] && fleet[i].arrival <= t) out.push_back(i);
    }
    return out;
}

StepRecord mpc_step(SimState& state, const Fleet& fleet, const NetworkSpec& spec, const MpcConfig& cfg) {
    const int T = fleet.horizon();
    const int t = state.clock;
    if (t < 0 || t >= T) throw InvalidParameter("simulation clock outside the horizon");
    const auto start = std::chrono::steady_clock::now();

    StepRecord rec;
    rec.t = t;
    rec.executed = Eigen::VectorXd::Zero(fleet.size());

    const std::vector<int> fresh = reveal(fleet, cfg.reveal == RevealMode::FullInformation ? T - 1 : t, state.revealed);
    for (int i : fresh) {
        state.revealed[static_cast<std::size_t>(i)] = true;
        rec.revealed_ids.push_back(fleet[i].id);
    }

    // Sub-fleet over [t, T): revealed EVs that are still connected or upcoming,
    // plus revealed EVs that still need a phase.
    const int remaining = T - t;
    std::vector<int> members;
    std::vector<SessionProfile> sub;
    PartialAssignment pins;
    for (int i = 0; i < fleet.size(); ++i) {
        const auto k = static_cast<std::size_t>(i);
        if (!state.revealed[k]) continue;
        const ResidualProfile& d = state.profiles[k];
        const bool connected = d.duration > 0 && d.arrival + d.duration > t;
        if (!connected && state.committed[k]) continue;
        SessionProfile s;
        s.id = fleet[i].id;
        s.arrival = std::clamp(d.arrival - t, 0, remaining - 1);
        s.duration = connected ? std::min(d.duration, remaining - s.arrival) : 0;
        s.energy = connected ? std::max(0.0, d.energy) : 0.0;
        members.push_back(i);
        sub.push_back(std::move(s));
        pins.push_back(state.committed[k]);
    }

    auto commit = [&](int local, Phase p) {
        const auto k = static_cast<std::size_t>(members[static_cast<std::size_t>(local)]);
        if (state.committed[k]) return;
        state.committed[k] = p;
        rec.decisions.emplace_back(fleet[members[static_cast<std::size_t>(local)]].id, p);
    };

    if (!members.empty()) {
        try {
            const Fleet window(sub, remaining, fleet.step_hours());
            const bool any_free = std::any_of(pins.begin(), pins.end(), [](const auto& p) { return !p.has_value(); });
            std::vector<Phase> phases(members.size());
            if (any_free) {
                const BnBResult bnb = branch_and_bound(window, spec, cfg.constraint(window, spec), cfg.bnb, pins);
                rec.nodes = bnb.nodes;
                if (bnb.status == BnBStatus::Infeasible) throw SolverError("phase relaxation infeasible");
                phases = bnb.phases.assignment();
            } else {
                for (std::size_t j = 0; j < pins.size(); ++j) phases[j] = *pins[j];
            }
            for (std::size_t j = 0; j < phases.size(); ++j) commit(static_cast<int>(j), phases[j]);

            Eigen::VectorXd w = Eigen::VectorXd::Ones(remaining);
            if (cfg.weights == WeightKind::QuickCharge) {
                for (int tau = 0; tau < remaining; ++tau) w(tau) = static_cast<double>(T - (t + tau));
            }
            const FixedPhaseResult r = solve_fixed_phase(PhaseSelection(phases), window, spec, w, cfg.socp);
            if (!r.optimal()) throw SolverError("SOCP(X) failed: " + std::string(to_string(r.status)));
            rec.objective = r.objective;
            for (std::size_t j = 0; j < members.size(); ++j) rec.executed(members[j]) = r.schedule.power(static_cast<Eigen::Index>(j), 0);
        } catch (const Error& e) {
            rec.failed = true;
            rec.failure = e.what();
            rec.executed.setZero();
            // Phases are physical plugs: anyone still unassigned gets one regardless.
            for (std::size_t j = 0; j < members.size(); ++j) commit(static_cast<int>(j), kPhases[j % 3]);
        }
    }

    // Algorithm state update for every EV.
    for (int i = 0; i < fleet.size(); ++i) {
        auto& d = state.profiles[static_cast<std::size_t>(i)];
        const double a = rec.executed(i);
        state.delivered(i, t) = a;
        d.energy -= a * fleet.step_hours();
        d.duration = std::max(0, std::min(d.arrival + d.duration - t - 1, d.duration));
        d.arrival = std::max(t + 1, d.arrival);
    }
    state.clock = t + 1;
    rec.solve_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return rec;
}

std::vector<double> EpisodeResult::step_ms() const {
    std::vector<double> out;
    for (const auto& s : steps) out.push_back(s.solve_ms);
    return out;
}

std::vector<double> EpisodeResult::objective_trace() const {
    std::vector<double> out;
    for (const auto& s : steps) out.push_back(s.objective);
    return out;
}

double EpisodeResult::delivered_energy(double step_hours) const {
    return delivered.power.sum() * step_hours;
}

PhaseSelection EpisodeResult::selection() const {
    std::vector<Phase> out;
    for (const auto& p : phases) out.push_back(p.value_or(Phase::AB));
    return PhaseSelection(out);
}

EpisodeResult run_episode(const Fleet& fleet, const NetworkSpec& spec, const MpcConfig& cfg) {
    SimState state = SimState::initial(fleet);
    EpisodeResult out;
    for (int t = 0; t < fleet.horizon(); ++t) {
        StepRecord rec = mpc_step(state, fleet, spec, cfg);
        if (rec.failed) ++out.failed_steps;
        out.steps.push_back(std::move(rec));
    }
    out.delivered.power = state.delivered;
    out.phases = state.committed;
    out.residual_energy.resize(fleet.size());
    for (int i = 0; i < fleet.size(); ++i) out.residual_energy(i) = state.profiles[static_cast<std::size_t>(i)].energy;
    return out;
}

std::string to_json_line(const StepRecord& step, const Fleet& fleet) {
    nlohmann::json j;
    j["t"] = step.t;
    j["revealed"] = step.revealed_ids;
    nlohmann::json decisions = nlohmann::json::object();
    for (const auto& [id, p] : step.decisions) decisions[id] = std::string(to_string(p));
    j["decisions"] = decisions;
    nlohmann::json executed = nlohmann::json::object();
    for (int i = 0; i < fleet.size(); ++i) {
        if (step.executed(i) != 0.0) executed[fleet[i].id] = step.executed(i);
    }
    j["executed"] = executed;
    j["objective"] = step.objective;
    j["solve_ms"] = step.solve_ms;
    j["nodes"] = step.nodes;
    if (step.failed) j["failure"] = step.failure;
    return j.dump();
}

}  // namespace phaseopt
