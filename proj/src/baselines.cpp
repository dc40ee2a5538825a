#include "phaseopt/baselines.hpp"

#include "phaseopt/error.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <random>
#include <sstream>

namespace phaseopt {

namespace {

std::string format_number(double v) {
    std::ostringstream os;
    os.precision(10);
    os << v;
    return os.str();
}

}  // namespace

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::EvDeclared: return "ev";
        case Strategy::UniformRandom: return "uni";
        case Strategy::RoundRobin: return "rrb";
        case Strategy::Worst: return "wst";
    }
    return "?";
}

Strategy parse_strategy(std::string_view name) {
    std::string s(name);
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    if (s == "ev" || s == "ev_declared") return Strategy::EvDeclared;
    if (s == "uni" || s == "uniform_random") return Strategy::UniformRandom;
    if (s == "rrb" || s == "round_robin") return Strategy::RoundRobin;
    if (s == "wst" || s == "worst") return Strategy::Worst;
    throw InvalidParameter("unknown baseline strategy '" + std::string(name) + "'");
}

PhaseSelection baseline_phases(const Fleet& fleet, Strategy strategy, std::uint64_t seed) {
    const int N = fleet.size();
    std::vector<Phase> out(static_cast<std::size_t>(N), Phase::AB);
    switch (strategy) {
        case Strategy::EvDeclared:
            for (int i = 0; i < N; ++i) {
                if (!fleet[i].declared_phase) {
                    throw DataError("session '" + fleet[i].id + "' has no declared phase");
                }
                out[static_cast<std::size_t>(i)] = *fleet[i].declared_phase;
            }
            break;
        case Strategy::UniformRandom: {
            std::mt19937_64 rng(seed);
            std::uniform_int_distribution<int> pick(0, 2);
            for (auto& p : out) p = kPhases[static_cast<std::size_t>(pick(rng))];
            break;
        }
        case Strategy::RoundRobin: {
            std::vector<int> idx(static_cast<std::size_t>(N));
            std::iota(idx.begin(), idx.end(), 0);
            std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
                if (fleet[a].arrival != fleet[b].arrival) return fleet[a].arrival < fleet[b].arrival;
                return fleet[a].id < fleet[b].id;
            });
            for (std::size_t k = 0; k < idx.size(); ++k) out[static_cast<std::size_t>(idx[k])] = kPhases[k % 3];
            break;
        }
        case Strategy::Worst:
            break;
    }
    return PhaseSelection(out);
}

MetricsReport evaluate(const ChargingSchedule& schedule, const PhaseSelection& phases, const Fleet& fleet,
                       const NetworkSpec& spec, const std::optional<Eigen::VectorXd>& price) {
    const int N = fleet.size();
    const int T = fleet.horizon();
    if (schedule.power.rows() != N || schedule.power.cols() != T) throw DimensionError("schedule must be N x T");
    if (phases.size() != N) throw DimensionError("phase selection length must equal N");
    if (price && price->size() != T) {
        throw DimensionError("price vector has " + std::to_string(price->size()) + " entries, expected " +
                             std::to_string(T));
    }
    const double dt = fleet.step_hours();

    MetricsReport r;
    r.delivered_per_ev = schedule.power.rowwise().sum() * dt;
    r.delivered_kwh = r.delivered_per_ev.sum();
    r.demanded_kwh = fleet.total_energy();
    for (int i = 0; i < N; ++i) r.unmet_kwh += std::max(0.0, fleet[i].energy - r.delivered_per_ev(i));
    r.satisfaction_rate = r.demanded_kwh > 0.0 ? std::clamp(r.delivered_kwh / r.demanded_kwh, 0.0, 1.0) : 1.0;

    const AggregatePower p = aggregate(phases, schedule);
    for (int m = 0; m < 3; ++m) r.per_phase_energy[static_cast<std::size_t>(m)] = p.power.row(m).sum() * dt;
    if (T > 0) r.peak_line_load = line_magnitudes(p, build_phasors(spec.n_r)).maxCoeff();

    if (price) {
        const Eigen::VectorXd column_sums = schedule.power.colwise().sum().transpose();
        r.cost = dt * price->dot(column_sums);
        if (r.delivered_kwh > 0.0) r.average_price = r.cost / r.delivered_kwh;
    }
    return r;
}

nlohmann::json to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["delivered_kwh"] = r.delivered_kwh;
    j["delivered_per_ev_kwh"] = std::vector<double>(r.delivered_per_ev.data(), r.delivered_per_ev.data() + r.delivered_per_ev.size());
    j["demanded_kwh"] = r.demanded_kwh;
    j["unmet_kwh"] = r.unmet_kwh;
    j["satisfaction_rate"] = r.satisfaction_rate;
    j["per_phase_energy_kwh"] = {{"ab", r.per_phase_energy[0]}, {"bc", r.per_phase_energy[1]}, {"ca", r.per_phase_energy[2]}};
    j["cost"] = r.cost;
    j["average_price"] = r.average_price ? nlohmann::json(*r.average_price) : nlohmann::json(nullptr);
    j["peak_line_load_kw"] = r.peak_line_load;
    return j;
}

std::vector<std::string> metrics_csv_columns() {
    return {"delivered_kwh", "demanded_kwh", "unmet_kwh", "satisfaction_rate", "energy_ab_kwh",
            "energy_bc_kwh", "energy_ca_kwh", "cost",      "average_price",     "peak_line_load_kw"};
}

std::vector<std::string> metrics_csv_values(const MetricsReport& r) {
    return {format_number(r.delivered_kwh),
            format_number(r.demanded_kwh),
            format_number(r.unmet_kwh),
            format_number(r.satisfaction_rate),
            format_number(r.per_phase_energy[0]),
            format_number(r.per_phase_energy[1]),
            format_number(r.per_phase_energy[2]),
            format_number(r.cost),
            r.average_price ? format_number(*r.average_price) : std::string(),
            format_number(r.peak_line_load)};
}

}  // namespace phaseopt
