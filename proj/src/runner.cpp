#include "phaseopt/runner.hpp"

#include "phaseopt/baselines.hpp"
#include "phaseopt/error.hpp"
#include "phaseopt/mpc.hpp"
#include "phaseopt/programs.hpp"
#include "phaseopt/pxa.hpp"
#include "phaseopt/scenarios.hpp"

#include <nlohmann/json.hpp>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <sstream>

namespace phaseopt {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

struct Episode {
    std::string name;
    Fleet fleet;
    NetworkSpec spec;
};

struct Outcome {
    std::string strategy;
    PhaseSelection phases;
    ChargingSchedule schedule;
    double objective = 0.0;
    std::optional<double> relaxation;
    std::size_t nodes = 0;
};

std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + '"';
}

std::string csv_line(const std::vector<std::string>& cells) {
    std::string out;
    for (std::size_t k = 0; k < cells.size(); ++k) {
        if (k) out += ',';
        out += csv_escape(cells[k]);
    }
    return out + '\n';
}

std::string num(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

class ArtifactWriter {
public:
    explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) { fs::create_directories(dir_); }

    void write(const std::string& name, const std::string& content) {
        const fs::path p = dir_ / name;
        std::ofstream out(p, std::ios::binary | std::ios::trunc);
        if (!out) throw DataError("cannot write " + p.string());
        out << content;
        if (std::find(written.begin(), written.end(), p) == written.end()) written.push_back(p);
    }

    std::vector<fs::path> written;

private:
    fs::path dir_;
};

json phases_json(const PhaseSelection& x, const Fleet& fleet) {
    json j = json::object();
    for (int i = 0; i < fleet.size(); ++i) j[fleet[i].id] = std::string(to_string(x[i]));
    return j;
}

json schedule_json(const ChargingSchedule& a) {
    json rows = json::array();
    for (Eigen::Index i = 0; i < a.power.rows(); ++i) {
        std::vector<double> row(static_cast<std::size_t>(a.power.cols()));
        for (Eigen::Index t = 0; t < a.power.cols(); ++t) row[static_cast<std::size_t>(t)] = a.power(i, t);
        rows.push_back(row);
    }
    return rows;
}

BnBConfig bnb_config(const RunConfig& c) {
    BnBConfig b;
    b.gap_tol = c.bnb_gap;
    b.integrality_tol = c.integrality_tol;
    b.node_limit = c.node_limit;
    b.solver = c.tolerances;
    return b;
}

void check_contract(const Outcome& o, const Episode& e) {
    const FeasibilityReport r = check_feasibility(o.phases, o.schedule, e.fleet, e.spec, 1e-6);
    if (!r.feasible) {
        std::ostringstream os;
        os << o.strategy << " on " << e.name << " produced an infeasible schedule (charger " << r.charger << ", demand "
           << r.demand << ", network " << r.network << ")";
        throw ContractError(os.str());
    }
}

Outcome with_phases(const std::string& label, const PhaseSelection& x, const Episode& e, const RunConfig& c) {
    const FixedPhaseResult r = solve_fixed_phase(x, e.fleet, e.spec, unit_weights(e.fleet.horizon()), c.tolerances);
    if (r.status == SolveStatus::Infeasible) throw ContractError("SOCP(X) reported infeasible for " + label);
    if (!r.optimal()) throw SolverError("SOCP(X) failed for " + label + ": " + std::string(to_string(r.status)));
    return Outcome{label, x, r.schedule, r.objective, std::nullopt, 0};
}

Outcome solve_offline(const std::string& algorithm, const Episode& e, const RunConfig& c, std::uint64_t seed) {
    Outcome o;
    if (algorithm == "pxa") {
        PxaConfig cfg;
        cfg.bnb = bnb_config(c);
        cfg.socp = c.tolerances;
        const PxaSolution s = pxa(e.fleet, e.spec, build_constraint(c.constraint, e.fleet, e.spec, c.full_cap), cfg);
        o = Outcome{"pxa", s.phases, s.schedule, s.final_objective, s.relaxation_objective, s.node_count};
    } else if (algorithm == "bfsocp") {
        BfsocpConfig cfg;
        cfg.max_assignments = c.bfsocp_cap;
        cfg.solver = c.tolerances;
        const BfsocpResult r = bfsocp(e.fleet, e.spec, cfg);
        o = Outcome{"bfsocp", r.phases, r.schedule, r.objective, std::nullopt, r.solves};
    } else if (algorithm == "sa") {
        SaConfig cfg;
        cfg.iterations = c.sa_iterations;
        cfg.seed = seed;
        cfg.solver = c.tolerances;
        const SaResult r = simulated_annealing(e.fleet, e.spec, cfg);
        o = with_phases("sa", r.phases, e, c);
        o.nodes = r.solves;
    } else if (algorithm.rfind("baseline:", 0) == 0) {
        const Strategy s = parse_strategy(algorithm.substr(9));
        o = with_phases(std::string(to_string(s)), baseline_phases(e.fleet, s, seed), e, c);
    } else {
        throw InvalidParameter("unknown algorithm '" + algorithm + "'");
    }
    check_contract(o, e);
    return o;
}

std::vector<Episode> load_episodes(const RunRequest& req, const RunConfig& c, std::vector<std::string>& warnings) {
    std::vector<Episode> out;
    if (req.sessions) {
        IngestOptions opts;
        opts.step_hours = c.network.step_hours;
        opts.episode_hours = c.horizon_hours;
        opts.split_midnight = c.split_midnight;
        IngestResult r = ingest(*req.sessions, opts);
        warnings.insert(warnings.end(), r.warnings.begin(), r.warnings.end());
        for (std::size_t d = 0; d < r.episodes.size(); ++d) {
            out.push_back(Episode{"day" + std::to_string(d), std::move(r.episodes[d]), c.network});
        }
    } else {
        for (auto& s : toy_suite()) {
            if (req.c1_override) s.spec.c1 = *req.c1_override;
            out.push_back(Episode{s.name, std::move(s.fleet), s.spec});
        }
    }
    return out;
}

std::optional<Eigen::VectorXd> load_price(const RunConfig& c, json& hashes) {
    if (!c.price_file) return std::nullopt;
    hashes["price"] = fnv1a_file(*c.price_file);
    return read_price_file(*c.price_file);
}

bool all_declared(const Fleet& f) {
    return std::all_of(f.sessions().begin(), f.sessions().end(), [](const auto& s) { return s.declared_phase.has_value(); });
}

void run_solve(const RunRequest& req, const RunConfig& c, const std::vector<Episode>& episodes,
               const std::optional<Eigen::VectorXd>& price, ArtifactWriter& out) {
    json doc = {{"schema_version", kSchemaVersion}, {"subcommand", "solve"}, {"algorithm", c.algorithm}, {"episodes", json::array()}};
    std::string csv = csv_line([] {
        std::vector<std::string> h{"episode", "algorithm", "objective", "relaxation_objective", "nodes"};
        for (auto& col : metrics_csv_columns()) h.push_back(col);
        return h;
    }());
    std::string schedule_csv = "episode,id,phase,t,power_kw\n";
    for (std::size_t k = 0; k < episodes.size(); ++k) {
        const Episode& e = episodes[k];
        spdlog::info("solve {} ({} sessions) with {}", e.name, e.fleet.size(), c.algorithm);
        if (req.dump_programs) {
            const PhaseSelection rr = baseline_phases(e.fleet, Strategy::RoundRobin);
            out.write("program_" + e.name + ".json",
                      to_json(build_socp_fixed_phase(rr, e.fleet, e.spec, unit_weights(e.fleet.horizon()))));
        }
        const Outcome o = solve_offline(c.algorithm, e, c, c.seeds.front());
        const MetricsReport m = evaluate(o.schedule, o.phases, e.fleet, e.spec, price);
        json ej = {{"episode", e.name},           {"objective", o.objective},
                   {"phases", phases_json(o.phases, e.fleet)}, {"schedule_kw", schedule_json(o.schedule)},
                   {"metrics", to_json(m)},       {"nodes", o.nodes}};
        ej["relaxation_objective"] = o.relaxation ? json(*o.relaxation) : json(nullptr);
        doc["episodes"].push_back(ej);

        std::vector<std::string> row{e.name, c.algorithm, num(o.objective), o.relaxation ? num(*o.relaxation) : "",
                                     std::to_string(o.nodes)};
        for (auto& v : metrics_csv_values(m)) row.push_back(v);
        csv += csv_line(row);
        for (int i = 0; i < e.fleet.size(); ++i) {
            for (int t = 0; t < e.fleet.horizon(); ++t) {
                schedule_csv += csv_line({e.name, e.fleet[i].id, std::string(to_string(o.phases[i])), std::to_string(t),
                                          num(o.schedule.power(i, t))});
            }
        }
        // Flush after every episode so that a later failure keeps earlier results.
        if (req.format == OutputFormat::Json) {
            out.write("solution.json", doc.dump(2) + "\n");
        } else {
            out.write("solution.csv", csv);
            out.write("schedule.csv", schedule_csv);
        }
    }
    if (episodes.empty()) out.write(req.format == OutputFormat::Json ? "solution.json" : "solution.csv",
                                    req.format == OutputFormat::Json ? doc.dump(2) + "\n" : csv);
}

void run_simulate(const RunRequest& req, const RunConfig& c, const std::vector<Episode>& episodes,
                  const std::optional<Eigen::VectorXd>& price, ArtifactWriter& out) {
    MpcConfig cfg;
    cfg.reveal = c.online ? RevealMode::Online : RevealMode::FullInformation;
    cfg.weights = c.quick_charge ? WeightKind::QuickCharge : WeightKind::Unit;
    cfg.bnb = bnb_config(c);
    cfg.socp = c.tolerances;
    const ConstraintChoice choice = c.constraint;
    const std::size_t cap = c.full_cap;
    cfg.constraint = [choice, cap](const Fleet& f, const NetworkSpec& s) { return build_constraint(choice, f, s, cap); };

    json doc = {{"schema_version", kSchemaVersion}, {"subcommand", "simulate"}, {"episodes", json::array()}};
    std::string csv = csv_line([] {
        std::vector<std::string> h{"episode", "failed_steps", "median_step_ms", "max_step_ms"};
        for (auto& col : metrics_csv_columns()) h.push_back(col);
        return h;
    }());
    std::string events;
    bool failed = false;
    for (const Episode& e : episodes) {
        spdlog::info("simulate {} ({} sessions, {} steps)", e.name, e.fleet.size(), e.fleet.horizon());
        const EpisodeResult r = run_episode(e.fleet, e.spec, cfg);
        for (const auto& step : r.steps) {
            json line = json::parse(to_json_line(step, e.fleet));
            line["episode"] = e.name;
            events += line.dump() + "\n";
        }
        out.write("events.jsonl", events);

        const PhaseSelection x = r.selection();
        const MetricsReport m = evaluate(r.delivered, x, e.fleet, e.spec, price);
        std::vector<double> ms = r.step_ms();
        std::sort(ms.begin(), ms.end());
        const double median = ms.empty() ? 0.0 : ms[ms.size() / 2];
        const double worst = ms.empty() ? 0.0 : ms.back();
        doc["episodes"].push_back({{"episode", e.name},
                                   {"failed_steps", r.failed_steps},
                                   {"median_step_ms", median},
                                   {"max_step_ms", worst},
                                   {"phases", phases_json(x, e.fleet)},
                                   {"metrics", to_json(m)}});
        std::vector<std::string> row{e.name, std::to_string(r.failed_steps), num(median), num(worst)};
        for (auto& v : metrics_csv_values(m)) row.push_back(v);
        csv += csv_line(row);
        if (req.format == OutputFormat::Json) {
            out.write("simulate.json", doc.dump(2) + "\n");
        } else {
            out.write("simulate.csv", csv);
        }
        const FeasibilityReport f = check_feasibility(x, r.delivered, e.fleet, e.spec, 1e-6);
        if (!f.feasible) throw ContractError("executed schedule for " + e.name + " violates the constraints");
        failed = failed || r.failed_steps > 0;
    }
    if (episodes.empty()) out.write(req.format == OutputFormat::Json ? "simulate.json" : "simulate.csv",
                                    req.format == OutputFormat::Json ? doc.dump(2) + "\n" : csv);
    if (failed) throw SolverError("some MPC steps failed; see events.jsonl");
}

std::vector<std::string> comparison_strategies(const Fleet& f, const RunConfig& c) {
    std::vector<std::string> out{"pxa"};
    try {
        check_enumeration_size(f.size(), c.bfsocp_cap);
        out.push_back("bfsocp");
    } catch (const SizeError&) {
    }
    out.push_back("sa");
    if (all_declared(f)) out.push_back("baseline:ev");
    for (const char* s : {"baseline:uni", "baseline:rrb", "baseline:wst"}) out.push_back(s);
    return out;
}

void run_compare(const RunRequest& req, const RunConfig& c, const std::vector<Episode>& episodes,
                 const std::optional<Eigen::VectorXd>& price, ArtifactWriter& out) {
    std::vector<std::string> header{"episode", "strategy", "seed", "objective"};
    for (auto& col : metrics_csv_columns()) header.push_back(col);
    std::string csv = csv_line(header);
    json doc = {{"schema_version", kSchemaVersion}, {"subcommand", "compare"}, {"rows", json::array()}};
    const std::uint64_t seed = c.seeds.front();
    for (const Episode& e : episodes) {
        for (const std::string& algo : comparison_strategies(e.fleet, c)) {
            spdlog::info("compare {} with {}", e.name, algo);
            const Outcome o = solve_offline(algo, e, c, seed);
            const MetricsReport m = evaluate(o.schedule, o.phases, e.fleet, e.spec, price);
            std::vector<std::string> row{e.name, o.strategy, std::to_string(seed), num(o.objective)};
            for (auto& v : metrics_csv_values(m)) row.push_back(v);
            csv += csv_line(row);
            doc["rows"].push_back({{"episode", e.name}, {"strategy", o.strategy}, {"seed", seed},
                                   {"objective", o.objective}, {"metrics", to_json(m)}});
        }
        if (req.format == OutputFormat::Json) {
            out.write("compare.json", doc.dump(2) + "\n");
        } else {
            out.write("compare.csv", csv);
        }
    }
    if (episodes.empty()) out.write(req.format == OutputFormat::Json ? "compare.json" : "compare.csv",
                                    req.format == OutputFormat::Json ? doc.dump(2) + "\n" : csv);
}

void run_sweep(const RunRequest& req, const RunConfig& c, const std::vector<Episode>& episodes, ArtifactWriter& out) {
    std::string csv = csv_line({"episode", "c1", "strategy", "delivered_kwh", "unmet_kwh", "satisfaction_rate"});
    json doc = {{"schema_version", kSchemaVersion}, {"subcommand", "sweep"}, {"rows", json::array()}};
    const std::uint64_t seed = c.seeds.front();
    for (const Episode& base : episodes) {
        std::vector<double> grid = c.sweep_c1;
        if (grid.empty()) {
            for (double f : {0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0}) grid.push_back(f * base.spec.c1);
        }
        std::sort(grid.begin(), grid.end());
        std::vector<std::string> algos{"pxa"};
        if (all_declared(base.fleet)) algos.push_back("baseline:ev");
        for (const char* s : {"baseline:uni", "baseline:rrb", "baseline:wst"}) algos.push_back(s);
        for (double c1 : grid) {
            Episode e = base;
            e.spec.c1 = c1;
            for (const auto& algo : algos) {
                const Outcome o = solve_offline(algo, e, c, seed);
                const MetricsReport m = evaluate(o.schedule, o.phases, e.fleet, e.spec);
                csv += csv_line({e.name, num(c1), o.strategy, num(m.delivered_kwh), num(m.unmet_kwh), num(m.satisfaction_rate)});
                doc["rows"].push_back({{"episode", e.name}, {"c1", c1}, {"strategy", o.strategy},
                                       {"delivered_kwh", m.delivered_kwh}, {"unmet_kwh", m.unmet_kwh},
                                       {"satisfaction_rate", m.satisfaction_rate}});
            }
        }
        if (req.format == OutputFormat::Json) {
            out.write("sweep.json", doc.dump(2) + "\n");
        } else {
            out.write("sweep.csv", csv);
        }
    }
    if (episodes.empty()) out.write(req.format == OutputFormat::Json ? "sweep.json" : "sweep.csv",
                                    req.format == OutputFormat::Json ? doc.dump(2) + "\n" : csv);
}

}  // namespace

std::string_view to_string(Subcommand s) {
    switch (s) {
        case Subcommand::Solve: return "solve";
        case Subcommand::Simulate: return "simulate";
        case Subcommand::Sweep: return "sweep";
        case Subcommand::Compare: return "compare";
    }
    return "?";
}

Subcommand parse_subcommand(std::string_view name) {
    if (name == "solve") return Subcommand::Solve;
    if (name == "simulate") return Subcommand::Simulate;
    if (name == "sweep") return Subcommand::Sweep;
    if (name == "compare") return Subcommand::Compare;
    throw InvalidParameter("unknown subcommand '" + std::string(name) + "'");
}

RunOutcome run(const RunRequest& req) {
    RunOutcome outcome;
    RunConfig c = req.config;
    if (req.c1_override) c.network.c1 = *req.c1_override;

    std::optional<ArtifactWriter> out;
    json manifest;
    auto finish = [&](int code, const std::string& message) {
        outcome.exit_code = code;
        outcome.message = message;
        if (out) {
            manifest["status"] = code == kExitOk ? "ok" : "failed";
            manifest["exit_code"] = code;
            if (!message.empty()) manifest["message"] = message;
            try {
                out->write("run.json", manifest.dump(2) + "\n");
            } catch (const Error&) {
            }
            outcome.artifacts = out->written;
        }
        return outcome;
    };

    try {
        c.validate();
        out.emplace(req.out_dir);
        std::vector<std::string> warnings;
        json hashes = json::object();
        if (req.sessions) hashes["sessions"] = fnv1a_file(*req.sessions);
        if (req.config_path) hashes["config"] = fnv1a_file(*req.config_path);
        const auto price = load_price(c, hashes);
        const auto episodes = load_episodes(req, c, warnings);
        if (price) {
            for (const auto& e : episodes) {
                if (price->size() != e.fleet.horizon()) {
                    throw DimensionError("price file has " + std::to_string(price->size()) + " entries but the horizon is " +
                                         std::to_string(e.fleet.horizon()) + " steps");
                }
            }
        }
        for (const auto& w : warnings) spdlog::warn("{}", w);

        manifest = {{"schema_version", kSchemaVersion},
                    {"subcommand", std::string(to_string(req.subcommand))},
                    {"config", to_json(c)},
                    {"seeds", c.seeds},
                    {"input_hashes", hashes},
                    {"sessions", req.sessions ? json(req.sessions->string()) : json("builtin:toy_suite")},
                    {"format", req.format == OutputFormat::Json ? "json" : "csv"},
                    {"episodes", episodes.size()},
                    {"warnings", warnings},
                    {"status", "running"}};
        out->write("run.json", manifest.dump(2) + "\n");

        switch (req.subcommand) {
            case Subcommand::Solve: run_solve(req, c, episodes, price, *out); break;
            case Subcommand::Simulate: run_simulate(req, c, episodes, price, *out); break;
            case Subcommand::Sweep: run_sweep(req, c, episodes, *out); break;
            case Subcommand::Compare: run_compare(req, c, episodes, price, *out); break;
        }
        return finish(kExitOk, "");
    } catch (const ContractError& e) {
        return finish(kExitSolver, e.what());
    } catch (const SolverError& e) {
        return finish(kExitSolver, e.what());
    } catch (const Error& e) {
        return finish(kExitInput, e.what());
    } catch (const fs::filesystem_error& e) {
        return finish(kExitInput, e.what());
    }
}

}  // namespace phaseopt
