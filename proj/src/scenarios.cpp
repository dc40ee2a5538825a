#include "phaseopt/scenarios.hpp"

#include "phaseopt/error.hpp"

#include <algorithm>
#include <initializer_list>

namespace phaseopt {

namespace {

struct Window {
    const char* id;
    int arrival;
    int duration;
    double fill;  ///< energy as a fraction of r_max * duration * step
};

constexpr int kToyHorizon = 12;
constexpr double kToyStep = 0.2;
constexpr double kToyRate = 3.0;

Scenario make_toy(std::string name, std::initializer_list<Window> windows) {
    std::vector<SessionProfile> sessions;
    for (const auto& w : windows) {
        SessionProfile s;
        s.id = w.id;
        s.arrival = w.arrival;
        s.duration = w.duration;
        s.energy = w.fill * kToyRate * w.duration * kToyStep;
        sessions.push_back(std::move(s));
    }
    NetworkSpec spec;
    spec.r_max = kToyRate;
    spec.c1 = 5.25;
    spec.c2 = 20.0;
    spec.n_r = 4.0;
    spec.step_hours = kToyStep;
    return Scenario{std::move(name), Fleet(std::move(sessions), kToyHorizon, kToyStep), spec};
}

}  // namespace

Fleet random_fleet(const RandomFleetOptions& opts, std::mt19937_64& rng) {
    if (opts.size < 0 || opts.horizon < 1) throw InvalidParameter("random fleet needs size >= 0 and horizon >= 1");
    if (!(opts.min_fill >= 0.0 && opts.min_fill <= 1.0)) throw InvalidParameter("min_fill must lie in [0, 1]");
    std::uniform_real_distribution<double> fill(opts.min_fill, 1.0);
    std::vector<SessionProfile> sessions;
    for (int i = 0; i < opts.size; ++i) {
        SessionProfile s;
        s.id = "ev" + std::to_string(i);
        s.arrival = opts.all_at_start ? 0 : std::uniform_int_distribution<int>(0, opts.horizon - 1)(rng);
        s.duration = std::uniform_int_distribution<int>(1, opts.horizon - s.arrival)(rng);
        const double full = opts.r_max * s.duration * opts.step_hours;
        s.energy = opts.zero_laxity ? full : fill(rng) * full;
        sessions.push_back(std::move(s));
    }
    return Fleet(std::move(sessions), opts.horizon, opts.step_hours);
}

NetworkSpec random_network(const RandomFleetOptions& opts, std::mt19937_64& rng) {
    NetworkSpec spec;
    spec.r_max = opts.r_max;
    spec.step_hours = opts.step_hours;
    spec.c1 = std::uniform_real_distribution<double>(0.8, 2.2)(rng) * opts.r_max;
    spec.c2 = std::uniform_real_distribution<double>(0.6, 2.0)(rng) * opts.r_max;
    const double ratios[] = {1.0, 2.0, 4.0};
    spec.n_r = ratios[std::uniform_int_distribution<int>(0, 2)(rng)];
    return spec;
}

std::vector<Scenario> toy_suite() {
    std::vector<Scenario> suite;
    // Zero laxity.
    suite.push_back(make_toy("zl-relay", {{"a", 0, 12, 1}, {"b", 0, 6, 1}, {"c", 0, 6, 1}, {"d", 6, 6, 1}, {"e", 6, 6, 1}}));
    suite.push_back(make_toy("zl-stagger", {{"a", 0, 10, 1}, {"b", 1, 4, 1}, {"c", 2, 4, 1}, {"d", 5, 7, 1}, {"e", 6, 6, 1}}));
    suite.push_back(make_toy("zl-shifts", {{"a", 0, 6, 1}, {"b", 0, 6, 1}, {"c", 0, 6, 1}, {"d", 6, 6, 1}, {"e", 6, 6, 1}, {"f", 6, 6, 1}}));
    suite.push_back(make_toy("zl-anchor", {{"a", 0, 12, 1}, {"b", 0, 3, 1}, {"d", 0, 12, 1}, {"c", 3, 3, 1}, {"e", 6, 6, 1}}));
    // Positive laxity.
    suite.push_back(make_toy("relay", {{"a", 0, 12, 0.9}, {"b", 0, 6, 0.9}, {"c", 0, 6, 0.9}, {"d", 6, 6, 0.9}, {"e", 6, 6, 0.9}}));
    suite.push_back(make_toy("stagger", {{"a", 0, 10, 0.85}, {"b", 1, 4, 0.9}, {"c", 2, 4, 0.9}, {"d", 5, 7, 0.9}, {"e", 6, 6, 0.85}}));
    suite.push_back(make_toy("long-stay", {{"a", 0, 12, 0.95}, {"b", 0, 12, 0.95}, {"c", 0, 12, 0.95}}));
    suite.push_back(make_toy("overlap", {{"a", 0, 8, 0.9}, {"b", 2, 8, 0.9}, {"c", 4, 8, 0.9}, {"d", 0, 4, 0.9}, {"e", 8, 4, 0.9}}));
    suite.push_back(make_toy("waves", {{"a", 0, 4, 0.9}, {"b", 0, 4, 0.9}, {"c", 0, 4, 0.9}, {"d", 4, 4, 0.9}, {"e", 4, 4, 0.9}, {"f", 8, 4, 0.9}, {"g", 8, 4, 0.9}}));
    return suite;
}

}  // namespace phaseopt
