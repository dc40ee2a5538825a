#pragma once

// Test-side oracles. These recompute quantities from first principles and do
// not call the library routines they are used to check.

#include "phaseopt/model.hpp"
#include "phaseopt/scenarios.hpp"

#include <array>
#include <cmath>
#include <complex>
#include <numbers>
#include <random>
#include <string>
#include <vector>

namespace testsupport {

using phaseopt::Phase;

inline std::complex<double> unit_at(double degrees) {
    return std::polar(1.0, degrees * std::numbers::pi / 180.0);
}

/// Secondary line currents for phase powers (ab, bc, ca): line a = ab - ca,
/// line b = bc - ab, line c = ca - bc, each phase carried at its own angle.
inline std::array<double, 6> line_loads(double ab, double bc, double ca, double n_r) {
    const std::complex<double> pab = ab * unit_at(30.0);
    const std::complex<double> pbc = bc * unit_at(-90.0);
    const std::complex<double> pca = ca * unit_at(150.0);
    const double k = 1.0 / n_r;
    return {std::abs(pab - pca),
            std::abs(pbc - pab),
            std::abs(pca - pbc),
            std::abs(k * pab + k * pbc - 2.0 * k * pca),
            std::abs(-2.0 * k * pab + k * pbc + k * pca),
            std::abs(k * pab - 2.0 * k * pbc + k * pca)};
}

/// Worst violation of the box, demand and line limits, recomputed by hand.
inline double max_violation(const std::vector<Phase>& phases, const Eigen::MatrixXd& a, const phaseopt::Fleet& fleet,
                            const phaseopt::NetworkSpec& spec) {
    double worst = 0.0;
    for (int i = 0; i < fleet.size(); ++i) {
        const auto& s = fleet[i];
        double energy = 0.0;
        for (int t = 0; t < fleet.horizon(); ++t) {
            const bool present = t >= s.arrival && t < s.arrival + s.duration;
            const double cap = present ? spec.r_max : 0.0;
            worst = std::max({worst, -a(i, t), a(i, t) - cap});
            energy += a(i, t) * fleet.step_hours();
        }
        worst = std::max(worst, energy - s.energy);
    }
    for (int t = 0; t < fleet.horizon(); ++t) {
        std::array<double, 3> p{0.0, 0.0, 0.0};
        for (int i = 0; i < fleet.size(); ++i) p[static_cast<std::size_t>(phases[static_cast<std::size_t>(i)])] += a(i, t);
        const auto loads = line_loads(p[0], p[1], p[2], spec.n_r);
        for (int l = 0; l < 6; ++l) worst = std::max(worst, loads[static_cast<std::size_t>(l)] - (l < 3 ? spec.c1 : spec.c2));
    }
    return worst;
}

/// Every phase assignment of n EVs, first EV varying slowest.
inline std::vector<std::vector<Phase>> all_assignments(int n) {
    std::vector<std::vector<Phase>> out{{}};
    for (int i = 0; i < n; ++i) {
        std::vector<std::vector<Phase>> next;
        for (const auto& prefix : out) {
            for (Phase p : phaseopt::kPhases) {
                auto v = prefix;
                v.push_back(p);
                next.push_back(std::move(v));
            }
        }
        out = std::move(next);
    }
    return out;
}

inline double rel_diff(double a, double b) {
    return std::abs(a - b) / std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

struct Window {
    int arrival;
    int duration;
    double energy;
};

/// Sessions "s0", "s1", ... with the given windows.
inline phaseopt::Fleet fleet_of(const std::vector<Window>& windows, int horizon, double step_hours = 0.2) {
    std::vector<phaseopt::SessionProfile> sessions;
    for (std::size_t i = 0; i < windows.size(); ++i) {
        sessions.push_back({"s" + std::to_string(i), windows[i].arrival, windows[i].duration, windows[i].energy, {}});
    }
    return phaseopt::Fleet(std::move(sessions), horizon, step_hours);
}

inline phaseopt::NetworkSpec network(double c1, double c2 = 20.0, double r_max = 3.0, double n_r = 4.0,
                                     double step_hours = 0.2) {
    phaseopt::NetworkSpec spec;
    spec.r_max = r_max;
    spec.c1 = c1;
    spec.c2 = c2;
    spec.n_r = n_r;
    spec.step_hours = step_hours;
    return spec;
}

struct Instance {
    phaseopt::Fleet fleet;
    phaseopt::NetworkSpec spec;
};

inline Instance random_instance(std::mt19937_64& rng, int n, int horizon, bool zero_laxity, bool all_at_start = false) {
    phaseopt::RandomFleetOptions opts;
    opts.size = n;
    opts.horizon = horizon;
    opts.zero_laxity = zero_laxity;
    opts.all_at_start = all_at_start;
    phaseopt::Fleet fleet = phaseopt::random_fleet(opts, rng);
    phaseopt::NetworkSpec spec = phaseopt::random_network(opts, rng);
    return {std::move(fleet), spec};
}

}  // namespace testsupport
