#include "phaseopt/io.hpp"

#include "phaseopt/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace phaseopt {

namespace {

using nlohmann::json;

std::string trim(std::string_view s) {
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out(s.substr(b, e - b));
    if (out.size() >= 2 && out.front() == '"' && out.back() == '"') out = out.substr(1, out.size() - 2);
    return out;
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (char c : line) {
        if (c == '"') {
            quoted = !quoted;
        } else if (c == ',' && !quoted) {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell.push_back(c);
        }
    }
    out.push_back(trim(cell));
    return out;
}

std::string at_line(std::size_t line) { return "line " + std::to_string(line) + ": "; }

double parse_number(const std::string& text, const std::string& field, std::size_t line) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::exception&) {
        throw DataError(at_line(line) + "field '" + field + "' is not a number: '" + text + "'");
    }
}

void check_record(const SessionRecord& r, std::size_t line) {
    if (r.id.empty()) throw DataError(at_line(line) + "missing id");
    if (!std::isfinite(r.arrival_hours) || r.arrival_hours < 0.0) throw DataError(at_line(line) + "arrival_hours must be >= 0");
    if (!std::isfinite(r.duration_hours) || r.duration_hours < 0.0) throw DataError(at_line(line) + "duration_hours must be >= 0");
    if (!std::isfinite(r.energy_kwh) || r.energy_kwh < 0.0) throw DataError(at_line(line) + "energy_kwh must be >= 0");
}

const std::set<std::string> kSessionFields{"id", "arrival_hours", "duration_hours", "energy_kwh", "declared_phase"};

std::string format_hours(double v) {
    std::ostringstream os;
    os << std::setprecision(17) << v;
    return os.str();
}

}  // namespace

std::vector<SessionRecord> parse_session_jsonl(std::istream& in, std::vector<std::string>* warnings) {
    std::vector<SessionRecord> out;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (trim(text).empty()) continue;
        json j;
        try {
            j = json::parse(text);
        } catch (const json::parse_error& e) {
            throw DataError(at_line(line) + "malformed JSON (" + e.what() + ")");
        }
        if (!j.is_object()) throw DataError(at_line(line) + "record must be a JSON object");
        SessionRecord r;
        try {
            const json& id = j.at("id");
            r.id = id.is_string() ? id.get<std::string>() : id.dump();
            r.arrival_hours = j.at("arrival_hours").get<double>();
            r.duration_hours = j.at("duration_hours").get<double>();
            r.energy_kwh = j.at("energy_kwh").get<double>();
            if (j.contains("declared_phase") && !j["declared_phase"].is_null()) {
                r.declared_phase = parse_phase(j["declared_phase"].get<std::string>());
            }
        } catch (const json::exception& e) {
            throw DataError(at_line(line) + "bad session record (" + e.what() + ")");
        } catch (const DataError& e) {
            throw DataError(at_line(line) + e.what());
        }
        check_record(r, line);
        if (warnings) {
            for (const auto& [key, value] : j.items()) {
                if (!kSessionFields.count(key)) warnings->push_back(at_line(line) + "ignoring unknown field '" + key + "'");
            }
        }
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SessionRecord> parse_session_csv(std::istream& in, std::vector<std::string>* warnings) {
    std::vector<SessionRecord> out;
    std::string text;
    std::size_t line = 0;
    std::map<std::string, std::size_t> columns;
    while (std::getline(in, text)) {
        ++line;
        if (!text.empty() && text.back() == '\r') text.pop_back();
        if (trim(text).empty()) continue;
        const auto cells = split_csv(text);
        if (columns.empty()) {
            for (std::size_t k = 0; k < cells.size(); ++k) {
                columns[cells[k]] = k;
                if (warnings && !kSessionFields.count(cells[k])) {
                    warnings->push_back(at_line(line) + "ignoring unknown column '" + cells[k] + "'");
                }
            }
            for (const char* need : {"id", "arrival_hours", "duration_hours", "energy_kwh"}) {
                if (!columns.count(need)) throw DataError(at_line(line) + "CSV header lacks column '" + need + "'");
            }
            continue;
        }
        auto cell = [&](const std::string& name) -> std::string {
            const std::size_t k = columns.at(name);
            if (k >= cells.size()) throw DataError(at_line(line) + "missing value for '" + name + "'");
            return cells[k];
        };
        SessionRecord r;
        r.id = cell("id");
        r.arrival_hours = parse_number(cell("arrival_hours"), "arrival_hours", line);
        r.duration_hours = parse_number(cell("duration_hours"), "duration_hours", line);
        r.energy_kwh = parse_number(cell("energy_kwh"), "energy_kwh", line);
        if (columns.count("declared_phase")) {
            const std::size_t k = columns.at("declared_phase");
            if (k < cells.size() && !cells[k].empty()) {
                try {
                    r.declared_phase = parse_phase(cells[k]);
                } catch (const DataError& e) {
                    throw DataError(at_line(line) + e.what());
                }
            }
        }
        check_record(r, line);
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<SessionRecord> read_session_records(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open session file " + path.string());
    std::string ext = path.extension().string();
    std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
    return ext == ".csv" ? parse_session_csv(in, warnings) : parse_session_jsonl(in, warnings);
}

IngestResult build_episodes(const std::vector<SessionRecord>& records, const IngestOptions& opts) {
    if (!(opts.step_hours > 0.0)) throw InvalidParameter("step_hours must be positive");
    if (!(opts.episode_hours > 0.0)) throw InvalidParameter("episode_hours must be positive");
    const double steps_exact = opts.episode_hours / opts.step_hours;
    const int horizon = static_cast<int>(std::llround(steps_exact));
    if (horizon < 1 || std::abs(steps_exact - horizon) > 1e-9 * std::max(1.0, steps_exact)) {
        throw InvalidParameter("episode length is not a whole number of steps");
    }

    IngestResult result;
    std::map<long long, std::vector<SessionProfile>> days;
    auto to_steps = [&](const SessionRecord& r, double arrival, double duration, std::string id, double energy) {
        SessionProfile s;
        s.id = std::move(id);
        s.arrival = static_cast<int>(std::floor(arrival / opts.step_hours + 1e-9));
        s.duration = static_cast<int>(std::ceil(duration / opts.step_hours - 1e-9));
        s.energy = energy;
        s.declared_phase = r.declared_phase;
        return s;
    };

    for (const auto& r : records) {
        long long day = static_cast<long long>(std::floor(r.arrival_hours / opts.episode_hours + 1e-12));
        double local = r.arrival_hours - day * opts.episode_hours;
        if (local < 0.0) local = 0.0;
        if (local >= opts.episode_hours - 1e-12) {
            ++day;
            local = 0.0;
        }
        if (!opts.split_midnight || local + r.duration_hours <= opts.episode_hours + 1e-9) {
            days[day].push_back(to_steps(r, local, r.duration_hours, r.id, r.energy_kwh));
            continue;
        }
        // Pro-rata split across day boundaries.
        double remaining = r.duration_hours;
        double energy_left = r.energy_kwh;
        int part = 0;
        while (remaining > 1e-9) {
            const double span = std::min(remaining, opts.episode_hours - local);
            const double share = remaining > 0.0 ? energy_left * span / remaining : 0.0;
            std::string id = part == 0 ? r.id : r.id + "/" + std::to_string(part);
            days[day].push_back(to_steps(r, local, span, std::move(id), share));
            energy_left -= share;
            remaining -= span;
            local = 0.0;
            ++day;
            ++part;
        }
        result.warnings.push_back("session '" + r.id + "' crosses midnight; split into " + std::to_string(part) + " parts");
    }

    if (days.empty()) {
        result.episodes.emplace_back(std::vector<SessionProfile>{}, horizon, opts.step_hours);
        return result;
    }
    const long long first = days.begin()->first;
    const long long last = days.rbegin()->first;
    for (long long d = first; d <= last; ++d) {
        auto sessions = days.count(d) ? days[d] : std::vector<SessionProfile>{};
        std::stable_sort(sessions.begin(), sessions.end(), [](const SessionProfile& a, const SessionProfile& b) {
            if (a.arrival != b.arrival) return a.arrival < b.arrival;
            return a.id < b.id;
        });
        Fleet fleet(std::move(sessions), horizon, opts.step_hours);
        for (const auto& w : fleet.warnings()) result.warnings.push_back("day " + std::to_string(d) + ": " + w);
        result.episodes.push_back(std::move(fleet));
    }
    return result;
}

IngestResult ingest(const std::filesystem::path& path, const IngestOptions& opts) {
    std::vector<std::string> warnings;
    const auto records = read_session_records(path, &warnings);
    IngestResult r = build_episodes(records, opts);
    r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
    return r;
}

void write_sessions_jsonl(const Fleet& fleet, std::ostream& out) {
    for (const auto& s : fleet.sessions()) {
        // Hand-formatted so that hours round-trip exactly through the parser.
        out << "{\"id\":" << json(s.id).dump() << ",\"arrival_hours\":" << format_hours(s.arrival * fleet.step_hours())
            << ",\"duration_hours\":" << format_hours(s.duration * fleet.step_hours())
            << ",\"energy_kwh\":" << format_hours(s.energy);
        if (s.declared_phase) out << ",\"declared_phase\":\"" << to_string(*s.declared_phase) << '"';
        out << "}\n";
    }
}

Eigen::VectorXd read_price_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open price file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::vector<double> values;
    const std::string head = trim(text);
    if (!head.empty() && head.front() == '[') {
        try {
            values = json::parse(head).get<std::vector<double>>();
        } catch (const json::exception& e) {
            throw DataError("price file " + path.string() + ": " + e.what());
        }
    } else {
        std::istringstream lines(text);
        std::string line;
        std::size_t n = 0;
        while (std::getline(lines, line)) {
            ++n;
            const auto cells = split_csv(line);
            if (cells.empty() || cells.back().empty()) continue;
            const std::string& cell = cells.back();
            // Skip a textual header.
            if (values.empty() && !std::isdigit(static_cast<unsigned char>(cell[0])) && cell[0] != '-' && cell[0] != '.') continue;
            values.push_back(parse_number(cell, "price", n));
        }
    }
    return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

void RunConfig::validate() const {
    network.validate();
    if (!(horizon_hours > 0.0)) throw InvalidParameter("T_hours must be positive");
    if (max_steps < 1) throw InvalidParameter("max_steps must be at least 1");
    const double steps = horizon_hours / network.step_hours;
    const long long rounded = std::llround(steps);
    if (std::abs(steps - static_cast<double>(rounded)) > 1e-9 * std::max(1.0, steps)) {
        throw InvalidParameter("T_hours / delta_t_hours is not an integer");
    }
    if (rounded < 1 || rounded > max_steps) {
        throw InvalidParameter("step count " + std::to_string(rounded) + " outside [1, " + std::to_string(max_steps) + "]");
    }
    if (seeds.empty()) throw InvalidParameter("at least one seed is required");
    if (sa_iterations < 1) throw InvalidParameter("sa_iterations must be at least 1");
    if (!(bnb_gap > 0.0) || !(integrality_tol > 0.0)) throw InvalidParameter("B&B tolerances must be positive");
    if (!(tolerances.feasibility > 0.0) || !(tolerances.gap > 0.0) || tolerances.max_iterations < 1) {
        throw InvalidParameter("solver tolerances must be positive");
    }
    const std::string& a = algorithm;
    if (a != "pxa" && a != "bfsocp" && a != "sa" && a.rfind("baseline:", 0) != 0) {
        throw InvalidParameter("unknown algorithm '" + a + "'");
    }
}

int RunConfig::horizon_steps() const {
    return static_cast<int>(std::llround(horizon_hours / network.step_hours));
}

std::string_view to_string(ConstraintChoice c) {
    switch (c) {
        case ConstraintChoice::MTilde: return "m_tilde";
        case ConstraintChoice::Identity: return "identity";
        case ConstraintChoice::Rate: return "rate";
        case ConstraintChoice::Full: return "full";
    }
    return "?";
}

ConstraintChoice parse_constraint_choice(std::string_view name) {
    if (name == "m_tilde") return ConstraintChoice::MTilde;
    if (name == "identity") return ConstraintChoice::Identity;
    if (name == "rate") return ConstraintChoice::Rate;
    if (name == "full" || name == "full_mt") return ConstraintChoice::Full;
    throw InvalidParameter("unknown m_choice '" + std::string(name) + "'");
}

SelectionConstraint build_constraint(ConstraintChoice c, const Fleet& fleet, const NetworkSpec& spec, std::size_t cap) {
    switch (c) {
        case ConstraintChoice::MTilde: return m_tilde_constraint(fleet, spec);
        case ConstraintChoice::Identity: return identity_constraint(fleet, spec);
        case ConstraintChoice::Rate: return rate_constraint(fleet, spec);
        case ConstraintChoice::Full: return full_constraint(fleet, spec, cap);
    }
    throw InvalidParameter("unknown constraint choice");
}

RunConfig parse_run_config(const json& j, std::vector<std::string>* warnings) {
    if (!j.is_object()) throw InvalidParameter("run config must be a JSON object");
    RunConfig c;
    auto warn_unknown = [&](const json& obj, const std::set<std::string>& known, const std::string& where) {
        if (!warnings) return;
        for (const auto& [key, value] : obj.items()) {
            if (!known.count(key)) warnings->push_back("config" + where + ": ignoring unknown key '" + key + "'");
        }
    };
    try {
        if (j.contains("schema_version") && j["schema_version"].get<int>() != kSchemaVersion) {
            throw InvalidParameter("unsupported config schema_version " + j["schema_version"].dump());
        }
        warn_unknown(j, {"schema_version", "network", "algorithm", "constraint", "seeds", "tolerances", "price_file",
                         "max_steps", "sa_iterations", "bfsocp_cap", "mpc", "sweep", "split_midnight"},
                     "");
        if (j.contains("network")) {
            const json& n = j["network"];
            warn_unknown(n, {"r_max", "c1", "c2", "n_r", "T_hours", "delta_t_hours"}, ".network");
            c.network.r_max = n.value("r_max", c.network.r_max);
            c.network.c1 = n.value("c1", c.network.c1);
            c.network.c2 = n.value("c2", c.network.c2);
            c.network.n_r = n.value("n_r", c.network.n_r);
            c.horizon_hours = n.value("T_hours", c.horizon_hours);
            c.network.step_hours = n.value("delta_t_hours", c.network.step_hours);
        }
        c.algorithm = j.value("algorithm", c.algorithm);
        if (j.contains("constraint")) {
            const json& k = j["constraint"];
            warn_unknown(k, {"m_choice", "cap"}, ".constraint");
            c.constraint = parse_constraint_choice(k.value("m_choice", std::string("m_tilde")));
            c.full_cap = k.value("cap", c.full_cap);
        }
        if (j.contains("seeds")) c.seeds = j["seeds"].get<std::vector<std::uint64_t>>();
        if (j.contains("tolerances")) {
            const json& t = j["tolerances"];
            warn_unknown(t, {"feasibility", "gap", "max_iterations", "bnb_gap", "integrality", "node_limit"}, ".tolerances");
            c.tolerances.feasibility = t.value("feasibility", c.tolerances.feasibility);
            c.tolerances.gap = t.value("gap", c.tolerances.gap);
            c.tolerances.max_iterations = t.value("max_iterations", c.tolerances.max_iterations);
            c.bnb_gap = t.value("bnb_gap", c.bnb_gap);
            c.integrality_tol = t.value("integrality", c.integrality_tol);
            c.node_limit = t.value("node_limit", c.node_limit);
        }
        if (j.contains("price_file") && !j["price_file"].is_null()) c.price_file = j["price_file"].get<std::string>();
        c.max_steps = j.value("max_steps", c.max_steps);
        c.sa_iterations = j.value("sa_iterations", c.sa_iterations);
        c.bfsocp_cap = j.value("bfsocp_cap", c.bfsocp_cap);
        c.split_midnight = j.value("split_midnight", c.split_midnight);
        if (j.contains("mpc")) {
            const json& m = j["mpc"];
            warn_unknown(m, {"reveal", "weights"}, ".mpc");
            const std::string reveal = m.value("reveal", std::string("online"));
            if (reveal != "online" && reveal != "full") throw InvalidParameter("mpc.reveal must be 'online' or 'full'");
            c.online = reveal == "online";
            const std::string weights = m.value("weights", std::string("quick_charge"));
            if (weights != "quick_charge" && weights != "unit") throw InvalidParameter("mpc.weights must be 'quick_charge' or 'unit'");
            c.quick_charge = weights == "quick_charge";
        }
        if (j.contains("sweep")) {
            const json& s = j["sweep"];
            warn_unknown(s, {"c1"}, ".sweep");
            if (s.contains("c1")) c.sweep_c1 = s["c1"].get<std::vector<double>>();
        }
    } catch (const json::exception& e) {
        throw InvalidParameter(std::string("bad run config: ") + e.what());
    }
    c.validate();
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    std::ifstream in(path);
    if (!in) throw InvalidParameter("cannot open config file " + path.string());
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw InvalidParameter("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return parse_run_config(j, warnings);
}

json to_json(const RunConfig& c) {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["network"] = {{"r_max", c.network.r_max}, {"c1", c.network.c1},           {"c2", c.network.c2},
                    {"n_r", c.network.n_r},     {"T_hours", c.horizon_hours},   {"delta_t_hours", c.network.step_hours}};
    j["algorithm"] = c.algorithm;
    j["constraint"] = {{"m_choice", std::string(to_string(c.constraint))}, {"cap", c.full_cap}};
    j["seeds"] = c.seeds;
    j["tolerances"] = {{"feasibility", c.tolerances.feasibility}, {"gap", c.tolerances.gap},
                       {"max_iterations", c.tolerances.max_iterations}, {"bnb_gap", c.bnb_gap},
                       {"integrality", c.integrality_tol}, {"node_limit", c.node_limit}};
    j["price_file"] = c.price_file ? json(*c.price_file) : json(nullptr);
    j["max_steps"] = c.max_steps;
    j["sa_iterations"] = c.sa_iterations;
    j["bfsocp_cap"] = c.bfsocp_cap;
    j["split_midnight"] = c.split_midnight;
    j["mpc"] = {{"reveal", c.online ? "online" : "full"}, {"weights", c.quick_charge ? "quick_charge" : "unit"}};
    j["sweep"] = {{"c1", c.sweep_c1}};
    return j;
}

std::string fnv1a(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

std::string fnv1a_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return fnv1a(buf.str());
}

}  // namespace phaseopt
