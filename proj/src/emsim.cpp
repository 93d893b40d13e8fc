#include "mi/emsim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace mi::emsim {

namespace {

struct Segment {
    Vec3 midpoint;
    Vec3 direction; // dl, not normalized
};

std::vector<Segment> segments_of(const WirePath& path) {
    std::vector<Segment> segs;
    const std::size_t n = path.points.size();
    segs.reserve(n);
    for (std::size_t i = 0; i + 1 < n; ++i) {
        segs.push_back({0.5 * (path.points[i] + path.points[i + 1]),
                        path.points[i + 1] - path.points[i]});
    }
    if (path.closed)
        segs.push_back({0.5 * (path.points[n - 1] + path.points[0]),
                        path.points[0] - path.points[n - 1]});
    return segs;
}

double max_segment_length(const std::vector<Segment>& segs) {
    double m = 0.0;
    for (const auto& s : segs)
        m = std::max(m, s.direction.norm());
    return m;
}

// Canonical operand order so that M(a,b) and M(b,a) run the identical
// summation sequence (floating-point addition is order-sensitive).
bool canonical_before(const WirePath& a, const WirePath& b) {
    if (a.points.size() != b.points.size())
        return a.points.size() < b.points.size();
    for (std::size_t i = 0; i < a.points.size(); ++i) {
        for (int c = 0; c < 3; ++c) {
            if (a.points[i](c) != b.points[i](c))
                return a.points[i](c) < b.points[i](c);
        }
    }
    return true; // identical paths, order irrelevant
}

struct NeumannSum {
    double value = 0.0;
    double min_distance = std::numeric_limits<double>::infinity();
};

double inner_row(const Segment& si, const std::vector<Segment>& other, double& min_dist) {
    double acc = 0.0;
    for (const auto& sj : other) {
        const double r = (si.midpoint - sj.midpoint).norm();
        min_dist = std::min(min_dist, r);
        acc += si.direction.dot(sj.direction) / r;
    }
    return acc;
}

NeumannSum neumann_double_sum_serial(const std::vector<Segment>& sa,
                                     const std::vector<Segment>& sb) {
    NeumannSum out;
    for (const auto& si : sa)
        out.value += inner_row(si, sb, out.min_distance);
    return out;
}

NeumannSum neumann_double_sum_parallel(const std::vector<Segment>& sa,
                                       const std::vector<Segment>& sb) {
    const auto n = static_cast<std::ptrdiff_t>(sa.size());
    std::vector<double> partial(sa.size(), 0.0);
    double min_dist = std::numeric_limits<double>::infinity();

#pragma omp parallel for schedule(static) reduction(min : min_dist)
    for (std::ptrdiff_t i = 0; i < n; ++i)
        partial[static_cast<std::size_t>(i)] = inner_row(sa[static_cast<std::size_t>(i)], sb, min_dist);

    NeumannSum out;
    out.min_distance = min_dist;
    for (double p : partial) // fixed-order reduction, independent of threads
        out.value += p;
    return out;
}

double mutual_inductance_impl(const WirePath& a, const WirePath& b, double permeability,
                              bool parallel) {
    validate_wirepath(a);
    validate_wirepath(b);
    const WirePath& first = canonical_before(a, b) ? a : b;
    const WirePath& second = canonical_before(a, b) ? b : a;
    const auto sa = segments_of(first);
    const auto sb = segments_of(second);
    const double guard = 10.0 * std::max(max_segment_length(sa), max_segment_length(sb));

    const NeumannSum sum =
        parallel ? neumann_double_sum_parallel(sa, sb) : neumann_double_sum_serial(sa, sb);
    if (sum.min_distance <= guard) {
        std::ostringstream oss;
        oss << "inter-path distance " << sum.min_distance << " m must exceed 10x segment length ("
            << guard << " m)";
        throw PathsTooCloseError(oss.str());
    }
    return permeability / (4.0 * M_PI) * sum.value;
}

} // namespace

void validate_wirepath(const WirePath& path) {
    if (path.points.size() < 3)
        throw InvalidSpecError("wire path needs at least 3 points");
    const std::size_t n = path.points.size();
    const std::size_t last = path.closed ? n : n - 1;
    for (std::size_t i = 0; i < last; ++i) {
        const Vec3& p = path.points[i];
        const Vec3& q = path.points[(i + 1) % n];
        if ((p - q).norm() <= 0.0)
            throw InvalidSpecError("wire path has coincident consecutive points");
    }
}

double path_length(const WirePath& path) {
    double len = 0.0;
    for (std::size_t i = 0; i + 1 < path.points.size(); ++i)
        len += (path.points[i + 1] - path.points[i]).norm();
    if (path.closed && path.points.size() > 1)
        len += (path.points.front() - path.points.back()).norm();
    return len;
}

double enclosed_area(const WirePath& path, const Vec3& center) {
    Vec3 acc = Vec3::Zero();
    const std::size_t n = path.points.size();
    for (std::size_t i = 0; i + 1 < n; ++i)
        acc += (path.points[i] - center).cross(path.points[i + 1] - center);
    if (path.closed && n > 1)
        acc += (path.points[n - 1] - center).cross(path.points[0] - center);
    return 0.5 * acc.norm();
}

void validate_spec(const SpiderwebSpec& spec) {
    if (!(spec.inner_diameter > 0.0) || !(spec.outer_diameter >= spec.inner_diameter))
        throw InvalidSpecError("spiderweb diameters must satisfy outer >= inner > 0");
    if (spec.turns < 1)
        throw InvalidSpecError("spiderweb turns must be >= 1");
    if (spec.segments_per_turn < 16)
        throw InvalidSpecError("spiderweb segments_per_turn must be >= 16");
    if (spec.weave_amplitude < 0.0)
        throw InvalidSpecError("weave_amplitude must be >= 0");
    if (spec.weave_amplitude > 0.0 && (spec.weave_crossings < 1 || spec.weave_crossings % 2 == 0))
        throw InvalidSpecError("weave_crossings must be a positive odd count");
    if (spec.include_feed && !(spec.feed_length > 0.0))
        throw InvalidSpecError("feed_length must be > 0 when include_feed is set");
}

WirePath build_spiderweb(const SpiderwebSpec& spec, const Pose& pose) {
    validate_spec(spec);
    const double r_in = 0.5 * spec.inner_diameter;
    const double r_out = 0.5 * spec.outer_diameter;
    const int n_seg = spec.turns * spec.segments_per_turn;
    const double t_total = 2.0 * M_PI * spec.turns;

    // In-plane orthonormal basis; w is the coil axis.
    const Vec3 w = pose.orientation.normalized();
    const Vec3 ref = std::abs(w.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY();
    const Vec3 u = w.cross(ref).normalized();
    const Vec3 v = w.cross(u);

    // The winding is a closed circuit: the wrap segment from the outer end
    // back to the inner start stands in for the feed-pair connection at the
    // coil. Leaving the spiral open adds a spurious stray-wire coupling of
    // the endpoint gap that decays like 1/d and swamps the loop term at
    // range.
    WirePath path;
    path.closed = true;
    const bool circle = r_out == r_in;
    path.points.reserve(static_cast<std::size_t>(n_seg) + 16);
    // Half-integer weave frequency: an odd number of crossings per turn
    // flips the corrugation phase between adjacent turns and keeps the
    // winding continuous.
    const double weave_freq = 0.5 * spec.weave_crossings;
    for (int i = 0; i < n_seg + (circle ? 0 : 1); ++i) {
        const double t = t_total * static_cast<double>(i) / static_cast<double>(n_seg);
        const double r = r_in + (r_out - r_in) * t / t_total;
        const double axial = spec.weave_amplitude * std::cos(weave_freq * t);
        path.points.push_back(pose.position + r * (std::cos(t) * u + std::sin(t) * v) +
                              axial * w);
    }

    if (spec.include_feed) {
        // Radial feed run from the winding end out to the connector and back,
        // the two conductors separated axially by the terminal spacing. The
        // pair mostly cancels but leaves a transverse loop of area
        // feed_length x separation, a cross-polarized moment the axial
        // dipole picture does not carry.
        constexpr double kFeedPairSeparation = 8e-3; // m
        const Vec3 end = path.points.back();
        const Vec3 radial = (end - pose.position).normalized();
        const double seg_len = 2.0 * M_PI * 0.5 * (r_in + r_out) / spec.segments_per_turn;
        const int n_feed = std::max(1, static_cast<int>(std::ceil(spec.feed_length / seg_len)));
        for (int i = 1; i <= n_feed; ++i)
            path.points.push_back(end + radial * (spec.feed_length * i / n_feed));
        for (int i = n_feed; i >= 1; --i)
            path.points.push_back(end + radial * (spec.feed_length * i / n_feed) -
                                  kFeedPairSeparation * w);
    }
    return path;
}

double mutual_inductance(const WirePath& a, const WirePath& b, double permeability) {
    return mutual_inductance_impl(a, b, permeability, true);
}

double mutual_inductance_serial(const WirePath& a, const WirePath& b, double permeability) {
    return mutual_inductance_impl(a, b, permeability, false);
}

Complex synthetic_channel(const WirePath& a, const WirePath& b, double resistance_a,
                          double resistance_b, double frequency, double permeability) {
    if (!(resistance_a > 0.0) || !(resistance_b > 0.0))
        throw InvalidSpecError("coil resistances must be > 0");
    if (!(frequency > 0.0))
        throw InvalidSpecError("frequency must be > 0");
    const double lambda = kSpeedOfLight / frequency;
    const double max_seg =
        std::max(max_segment_length(segments_of(a)), max_segment_length(segments_of(b)));
    if (max_seg >= lambda / 1000.0)
        throw InvalidSpecError("segment length violates quasistatic validity (>= lambda/1000)");
    const double m = mutual_inductance(a, b, permeability);
    return Complex(0.0, 2.0 * M_PI * frequency * m / (2.0 * std::sqrt(resistance_a * resistance_b)));
}

std::vector<ChannelVector> synthesize_dataset(const std::vector<SimAnchor>& anchors,
                                              const std::vector<Pose>& deployments,
                                              const SpiderwebSpec& agent_spec,
                                              double agent_resistance, double frequency,
                                              double permeability) {
    if (anchors.empty() || deployments.empty())
        throw InvalidSpecError("synthesize_dataset needs anchors and deployments");

    std::vector<WirePath> anchor_paths;
    anchor_paths.reserve(anchors.size());
    for (const auto& a : anchors)
        anchor_paths.push_back(build_spiderweb(a.spec, a.pose));

    const auto n_dep = static_cast<std::ptrdiff_t>(deployments.size());
    const auto n_anc = static_cast<std::ptrdiff_t>(anchors.size());
    std::vector<ChannelVector> out(deployments.size(), ChannelVector(n_anc));
    std::vector<std::string> failures(deployments.size());

#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < n_dep; ++i) {
        const auto di = static_cast<std::size_t>(i);
        try {
            const WirePath agent_path = build_spiderweb(agent_spec, deployments[di]);
            for (std::ptrdiff_t n = 0; n < n_anc; ++n) {
                const auto an = static_cast<std::size_t>(n);
                try {
                    out[di](n) = synthetic_channel(agent_path, anchor_paths[an],
                                                   agent_resistance, anchors[an].resistance,
                                                   frequency, permeability);
                } catch (const Error& e) {
                    std::ostringstream oss;
                    oss << "deployment " << di << ", anchor " << an << ": " << e.what();
                    throw PathsTooCloseError(oss.str());
                }
            }
        } catch (const Error& e) {
            failures[di] = e.what();
        }
    }

    std::string aggregate;
    for (const auto& f : failures) {
        if (!f.empty())
            aggregate += (aggregate.empty() ? "" : "; ") + f;
    }
    if (!aggregate.empty())
        throw PathsTooCloseError(aggregate);
    return out;
}

void write_wirepath_csv(const WirePath& path, std::ostream& os) {
    os << "x,y,z\n";
    char buf[96];
    for (const auto& p : path.points) {
        std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g\n", p.x(), p.y(), p.z());
        os << buf;
    }
}

WirePath read_wirepath_csv(std::istream& is) {
    WirePath path;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        if (lineno == 1 && line.rfind("x,", 0) == 0)
            continue; // header
        std::istringstream ls(line);
        Vec3 p;
        char sep1 = 0, sep2 = 0;
        if (!(ls >> p.x() >> sep1 >> p.y() >> sep2 >> p.z()) || sep1 != ',' || sep2 != ',') {
            std::ostringstream oss;
            oss << "wire path CSV line " << lineno << ": expected x,y,z";
            throw ParseError(oss.str());
        }
        path.points.push_back(p);
    }
    return path;
}

void write_wirepath_csv_file(const WirePath& path, const std::string& filename) {
    std::ofstream os(filename);
    if (!os)
        throw IoError("cannot open " + filename + " for writing");
    write_wirepath_csv(path, os);
}

WirePath read_wirepath_csv_file(const std::string& filename) {
    std::ifstream is(filename);
    if (!is)
        throw IoError("cannot open " + filename);
    return read_wirepath_csv(is);
}

} // namespace mi::emsim
