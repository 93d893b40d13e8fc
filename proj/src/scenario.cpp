#include "mi/scenario.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mi/model.hpp"

namespace mi::harness {

namespace {

using nlohmann::json;

std::vector<Vec3> default_orientations() {
    const double s = 1.0 / std::sqrt(2.0);
    return {
        Vec3(1, 0, 0), Vec3(0, 1, 0), Vec3(0, 0, 1),
        Vec3(s, s, 0), Vec3(0, s, s), Vec3(s, 0, s),
    };
}

Vec3 parse_vec3(const json& j, const std::string& what) {
    if (!j.is_array() || j.size() != 3)
        throw ConfigError(what + " must be an array of 3 numbers");
    return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

emsim::SpiderwebSpec parse_winding(const json& j, emsim::SpiderwebSpec base) {
    if (j.contains("inner_diameter"))
        base.inner_diameter = j["inner_diameter"].get<double>();
    if (j.contains("outer_diameter"))
        base.outer_diameter = j["outer_diameter"].get<double>();
    if (j.contains("turns"))
        base.turns = j["turns"].get<int>();
    if (j.contains("segments_per_turn"))
        base.segments_per_turn = j["segments_per_turn"].get<int>();
    if (j.contains("weave_amplitude"))
        base.weave_amplitude = j["weave_amplitude"].get<double>();
    if (j.contains("weave_crossings"))
        base.weave_crossings = j["weave_crossings"].get<int>();
    if (j.contains("include_feed"))
        base.include_feed = j["include_feed"].get<bool>();
    if (j.contains("feed_length"))
        base.feed_length = j["feed_length"].get<double>();
    return base;
}

} // namespace

std::vector<Pose> Scenario::deployment_poses() const {
    std::vector<Pose> poses;
    poses.reserve(static_cast<std::size_t>(grid.count_x) * grid.count_y * grid.count_z *
                  grid.orientations.size());
    const auto coord = [](double lo, double hi, int count, int i) {
        return count == 1 ? lo : lo + (hi - lo) * static_cast<double>(i) / (count - 1);
    };
    for (int ix = 0; ix < grid.count_x; ++ix) {
        for (int iy = 0; iy < grid.count_y; ++iy) {
            for (int iz = 0; iz < grid.count_z; ++iz) {
                const Vec3 p(coord(grid.lower.x(), grid.upper.x(), grid.count_x, ix),
                             coord(grid.lower.y(), grid.upper.y(), grid.count_y, iy),
                             coord(grid.lower.z(), grid.upper.z(), grid.count_z, iz));
                for (const auto& o : grid.orientations)
                    poses.push_back(Pose{p, o.normalized()});
            }
        }
    }
    return poses;
}

std::vector<emsim::SimAnchor> Scenario::sim_anchors() const {
    if (windings.size() != anchors.size())
        throw ConfigError("one winding spec per anchor required");
    std::vector<emsim::SimAnchor> out;
    out.reserve(anchors.size());
    for (std::size_t i = 0; i < anchors.size(); ++i)
        out.push_back({windings[i], anchors[i].pose, anchors[i].coil.resistance});
    return out;
}

std::vector<calib::PosePrior> Scenario::priors() const {
    std::vector<calib::PosePrior> out;
    out.reserve(anchors.size());
    for (const auto& a : anchors) {
        calib::PosePrior p;
        p.position_mean = a.pose.position;
        p.position_stddev = calibration.position_stddev;
        p.angle_stddev = calibration.angle_stddev;
        out.push_back(p);
    }
    return out;
}

Scenario default_scenario() {
    Scenario sc;
    sc.environment = Environment{};

    const double mean_radius = 0.5 * 0.5 * (0.100 + 0.130); // 57.5 mm
    sc.agent_coil.surface_area = M_PI * mean_radius * mean_radius;
    sc.agent_coil.turns = 10;
    sc.agent_coil.resistance = 0.36;

    sc.agent_winding = emsim::SpiderwebSpec{};
    sc.agent_winding.weave_amplitude = 0.0025;
    sc.agent_winding.include_feed = true;
    sc.agent_winding.feed_length = 0.05;

    const Vec3 room_center(1.5, 1.5, 1.0);
    const double z_odd = 2.0, z_even = 0.68;
    const std::vector<Vec3> border = {
        {0.0, 0.0, z_odd},  {1.5, 0.0, z_even}, {3.0, 0.0, z_odd},  {3.0, 1.5, z_even},
        {3.0, 3.0, z_odd},  {1.5, 3.0, z_even}, {0.0, 3.0, z_odd},  {0.0, 1.5, z_even},
    };
    for (const auto& pos : border) {
        Anchor a;
        a.pose = Pose::make(pos, room_center - pos);
        a.coil = sc.agent_coil;
        sc.anchors.push_back(a);
        sc.windings.push_back(sc.agent_winding);
    }

    sc.grid.orientations = default_orientations();
    return sc;
}

Scenario scenario_from_json_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }

    Scenario sc = default_scenario();
    try {
        if (j.contains("environment")) {
            const auto& e = j["environment"];
            if (e.contains("f_hz"))
                sc.environment.carrier_frequency = e["f_hz"].get<double>();
            if (e.contains("mu"))
                sc.environment.permeability = e["mu"].get<double>();
            if (e.contains("c"))
                sc.environment.wave_speed = e["c"].get<double>();
        }
        if (j.contains("coil")) {
            const auto& c = j["coil"];
            if (c.contains("surface_area"))
                sc.agent_coil.surface_area = c["surface_area"].get<double>();
            if (c.contains("turns"))
                sc.agent_coil.turns = c["turns"].get<int>();
            if (c.contains("resistance"))
                sc.agent_coil.resistance = c["resistance"].get<double>();
            sc.agent_winding = parse_winding(c, sc.agent_winding);
            if (c.contains("turns"))
                sc.agent_winding.turns = c["turns"].get<int>();
        }
        if (j.contains("anchors")) {
            sc.anchors.clear();
            sc.windings.clear();
            for (const auto& ja : j["anchors"]) {
                Anchor a;
                a.coil = sc.agent_coil;
                if (ja.contains("resistance"))
                    a.coil.resistance = ja["resistance"].get<double>();
                const Vec3 pos = parse_vec3(ja.at("pos"), "anchor pos");
                const double az = ja.at("azimuth").get<double>();
                const double pol = ja.at("polar").get<double>();
                a.pose = Pose{pos, model::spherical_to_unit(az, pol)};
                validate_anchor(a);
                sc.anchors.push_back(a);
                sc.windings.push_back(ja.contains("spec")
                                          ? parse_winding(ja["spec"], sc.agent_winding)
                                          : sc.agent_winding);
            }
            if (sc.anchors.empty())
                throw ConfigError("anchors array is empty");
        }
        if (j.contains("grid")) {
            const auto& g = j["grid"];
            if (g.contains("lower"))
                sc.grid.lower = parse_vec3(g["lower"], "grid lower");
            if (g.contains("upper"))
                sc.grid.upper = parse_vec3(g["upper"], "grid upper");
            if (g.contains("count")) {
                const auto& c = g["count"];
                if (!c.is_array() || c.size() != 3)
                    throw ConfigError("grid count must be [nx, ny, nz]");
                sc.grid.count_x = c[0].get<int>();
                sc.grid.count_y = c[1].get<int>();
                sc.grid.count_z = c[2].get<int>();
            }
            if (g.contains("orientations")) {
                sc.grid.orientations.clear();
                for (const auto& jo : g["orientations"])
                    sc.grid.orientations.push_back(parse_vec3(jo, "grid orientation").normalized());
                if (sc.grid.orientations.empty())
                    throw ConfigError("grid orientations array is empty");
            }
        }
        if (j.contains("wls")) {
            const auto& w = j["wls"];
            if (w.contains("num_initializations"))
                sc.wls.num_initializations = w["num_initializations"].get<int>();
            if (w.contains("init_lower"))
                sc.wls.init_lower = parse_vec3(w["init_lower"], "wls init_lower");
            if (w.contains("init_upper"))
                sc.wls.init_upper = parse_vec3(w["init_upper"], "wls init_upper");
            if (w.contains("lm_max_iterations"))
                sc.wls.lm_max_iterations = w["lm_max_iterations"].get<int>();
            if (w.contains("lm_initial_damping"))
                sc.wls.lm_initial_damping = w["lm_initial_damping"].get<double>();
            if (w.contains("step_tolerance"))
                sc.wls.step_tolerance = w["step_tolerance"].get<double>();
            if (w.contains("residual_tolerance"))
                sc.wls.residual_tolerance = w["residual_tolerance"].get<double>();
        }
        if (j.contains("calibration")) {
            const auto& c = j["calibration"];
            if (c.contains("position_stddev"))
                sc.calibration.position_stddev = c["position_stddev"].get<double>();
            if (c.contains("angle_stddev_deg"))
                sc.calibration.angle_stddev = c["angle_stddev_deg"].get<double>() * M_PI / 180.0;
        }
        if (j.contains("noise")) {
            const auto& n = j["noise"];
            if (n.contains("position_stddev"))
                sc.noise.position_stddev = n["position_stddev"].get<double>();
            if (n.contains("orientation_stddev_deg"))
                sc.noise.orientation_stddev =
                    n["orientation_stddev_deg"].get<double>() * M_PI / 180.0;
        }
        if (j.contains("peb")) {
            const auto& p = j["peb"];
            if (p.contains("case"))
                sc.peb.case_id = p["case"].get<int>();
            if (p.contains("params")) {
                const auto& q = p["params"];
                if (q.contains("n0_dbm_hz"))
                    sc.peb.n0_dbm_hz = q["n0_dbm_hz"].get<double>();
                if (q.contains("bandwidth_hz"))
                    sc.peb.bandwidth_hz = q["bandwidth_hz"].get<double>();
                if (q.contains("probe_dbm"))
                    sc.peb.probe_dbm = q["probe_dbm"].get<double>();
                if (q.contains("background_psd_dbm_hz"))
                    sc.peb.background_psd_dbm_hz = q["background_psd_dbm_hz"].get<double>();
            }
        }
        if (j.contains("seed"))
            sc.seed = j["seed"].get<std::uint64_t>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config JSON: ") + e.what());
    }

    validate_coil(sc.agent_coil);
    for (const auto& a : sc.anchors)
        validate_anchor(a);
    return sc;
}

Scenario scenario_from_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open config " + path);
    std::ostringstream buf;
    buf << is.rdbuf();
    return scenario_from_json_text(buf.str());
}

} // namespace mi::harness
