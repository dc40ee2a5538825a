#pragma once

// Synthetic instances: a seeded random fleet generator and the bundled
// nine-scenario toy suite.

#include "phaseopt/model.hpp"

#include <random>
#include <string>
#include <vector>

namespace phaseopt {

struct RandomFleetOptions {
    int size = 4;
    int horizon = 6;
    double step_hours = 0.2;
    double r_max = 3.0;
    bool zero_laxity = false;
    /// Without zero laxity, energy is drawn in [min_fill, 1] of r_max * d * step.
    double min_fill = 0.3;
    bool all_at_start = false;  ///< every arrival at step 0
};

/// Sessions get ids "ev0", "ev1", ... and durations of at least one step.
Fleet random_fleet(const RandomFleetOptions& opts, std::mt19937_64& rng);

/// Network with r_max and step taken from the options and line limits drawn
/// so that two or three EVs at full rate already bind: c1 in
/// [0.8, 2.2] * r_max, c2 in [0.6, 2] * r_max, n_r in {1, 2, 4}.
NetworkSpec random_network(const RandomFleetOptions& opts, std::mt19937_64& rng);

struct Scenario {
    std::string name;
    Fleet fleet;
    NetworkSpec spec;
};

/// Twelve steps of 0.2 h, r_max 3 kW, c1 5.25 kW (just above three balanced
/// chargers at full rate), c2 20 kW. The first four scenarios are zero
/// laxity. Every scenario admits full service for some phase selection.
std::vector<Scenario> toy_suite();

}  // namespace phaseopt
