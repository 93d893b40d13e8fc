#pragma once

#include <vector>

#include "mi/rng.hpp"
#include "mi/scenario.hpp"
#include "mi/types.hpp"

namespace helpers {

inline mi::CoilSpec reference_coil() {
    mi::CoilSpec c;
    const double mean_radius = 0.0575; // 115 mm mean diameter
    c.surface_area = M_PI * mean_radius * mean_radius;
    c.turns = 10;
    c.resistance = 0.36;
    return c;
}

inline mi::Environment reference_environment() { return mi::Environment{}; }

inline mi::Vec3 random_unit(mi::Rng& rng) {
    // Marsaglia-style rejection in the cube.
    for (;;) {
        const mi::Vec3 v(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
        const double n = v.norm();
        if (n > 1e-3 && n <= 1.0)
            return v / n;
    }
}

inline mi::Vec3 random_in_box(mi::Rng& rng, const mi::Vec3& lo, const mi::Vec3& hi) {
    return mi::Vec3(rng.uniform(lo.x(), hi.x()), rng.uniform(lo.y(), hi.y()),
                    rng.uniform(lo.z(), hi.z()));
}

// Default anchors with deterministic nonzero calibration state, for tests
// that need a "calibrated-looking" system.
inline std::vector<mi::Anchor> decorated_anchors(std::uint64_t seed = 7) {
    auto anchors = mi::harness::default_scenario().anchors;
    mi::Rng rng(seed);
    for (auto& a : anchors) {
        a.matching_factor = std::polar(rng.uniform(0.7, 0.99), rng.uniform(-0.4, 0.4));
        for (int c = 0; c < 3; ++c)
            a.multipath_field(c) = mi::Complex(rng.uniform(-0.2, 0.2), rng.uniform(-0.2, 0.2));
    }
    return anchors;
}

// Reduced grid for fast calibration tests.
inline mi::harness::Scenario small_scenario() {
    auto sc = mi::harness::default_scenario();
    sc.grid.count_x = 2;
    sc.grid.count_y = 2;
    sc.grid.count_z = 2;
    sc.agent_winding.segments_per_turn = 32;
    for (auto& w : sc.windings)
        w.segments_per_turn = 32;
    return sc;
}

} // namespace helpers
