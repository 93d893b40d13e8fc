#pragma once

#include <iosfwd>
#include <vector>

#include "mi/types.hpp"

namespace mi::emsim {

// 3D polyline discretizing a physical wire. Segments run between consecutive
// points; a closed path has an implicit segment from the last point back to
// the first.
struct WirePath {
    std::vector<Vec3> points;
    bool closed = false;
};

void validate_wirepath(const WirePath& path);

double path_length(const WirePath& path);

// Magnitude of the vector area swept around `center`; for a planar multi-turn
// winding this is the sum of the enclosed turn areas.
double enclosed_area(const WirePath& path, const Vec3& center);

// Spiral winding between inner and outer diameter. The wire weaves axially
// over the body's spokes (an odd number of crossings per turn, so
// consecutive turns interleave); weave_amplitude = 0 gives a flat spiral.
// An optional radial feed stub is traversed out and back.
struct SpiderwebSpec {
    double inner_diameter = 0.100; // m
    double outer_diameter = 0.130; // m
    int turns = 10;
    int segments_per_turn = 64;
    double weave_amplitude = 0.0; // m, axial
    int weave_crossings = 9;      // per turn, odd
    bool include_feed = false;
    double feed_length = 0.0; // m
};

void validate_spec(const SpiderwebSpec& spec);

// Winding centered at pose.position with plane normal pose.orientation.
WirePath build_spiderweb(const SpiderwebSpec& spec, const Pose& pose);

// Neumann double line integral M = (mu/4pi) sum_i sum_j (dl_i . dl_j)/r_ij
// over segment midpoints. Throws PathsTooClose when the paths come closer
// than 10x the longest segment (discretization would be inaccurate).
//
// The OpenMP variant reduces per-outer-segment partial sums in fixed index
// order and is bit-identical to the serial reference for any thread count.
double mutual_inductance(const WirePath& a, const WirePath& b, double permeability);
double mutual_inductance_serial(const WirePath& a, const WirePath& b, double permeability);

// Matched-resonant weak-coupling channel coefficient between two thin-wire
// coils in the magnetoquasistatic regime: h = j 2 pi f M / (2 sqrt(Ra Rb)).
Complex synthetic_channel(const WirePath& a, const WirePath& b, double resistance_a,
                          double resistance_b, double frequency, double permeability);

struct SimAnchor {
    SpiderwebSpec spec;
    Pose pose;
    double resistance = 0.36; // Ohm
};

// Per-deployment channel vectors from synthetic_channel; the agent winding is
// rebuilt at each deployment pose. Deterministic and parallel over links.
std::vector<ChannelVector> synthesize_dataset(const std::vector<SimAnchor>& anchors,
                                              const std::vector<Pose>& deployments,
                                              const SpiderwebSpec& agent_spec,
                                              double agent_resistance, double frequency,
                                              double permeability);

// CSV inspection format: header "x,y,z", one point per row, meters.
void write_wirepath_csv(const WirePath& path, std::ostream& os);
WirePath read_wirepath_csv(std::istream& is);
void write_wirepath_csv_file(const WirePath& path, const std::string& filename);
WirePath read_wirepath_csv_file(const std::string& filename);

} // namespace mi::emsim
