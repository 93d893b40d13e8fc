#include "mi/io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "mi/model.hpp"

namespace mi::harness {

namespace {

using nlohmann::json;

std::ofstream open_out(const std::string& path) {
    std::ofstream os(path);
    if (!os)
        throw IoError("cannot open " + path + " for writing");
    return os;
}

std::ifstream open_in(const std::string& path) {
    std::ifstream is(path);
    if (!is)
        throw IoError("cannot open " + path);
    return is;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ','))
        fields.push_back(field);
    if (!line.empty() && line.back() == ',')
        fields.emplace_back();
    return fields;
}

double parse_field_double(const std::string& s, std::size_t lineno, const std::string& col) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size())
            throw std::invalid_argument("trailing characters");
        return v;
    } catch (const std::exception&) {
        std::ostringstream oss;
        oss << "line " << lineno << ": cannot parse column '" << col << "' from '" << s << "'";
        throw ParseError(oss.str());
    }
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

void write_measurements_csv(const std::vector<calib::Deployment>& deployments,
                            const std::string& path) {
    if (deployments.empty())
        throw EmptyInputError("no deployments to write");
    auto os = open_out(path);
    const Eigen::Index n = deployments.front().measured.size();
    os << "i,px,py,pz,ox,oy,oz";
    for (Eigen::Index k = 1; k <= n; ++k)
        os << ",h" << k << "_re,h" << k << "_im";
    os << "\n";
    for (const auto& d : deployments) {
        if (d.measured.size() != n)
            throw DimensionMismatchError("inconsistent channel vector lengths");
        os << d.index;
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(d.agent_pose.position(c));
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(d.agent_pose.orientation(c));
        for (Eigen::Index k = 0; k < n; ++k)
            os << ',' << format_double(d.measured(k).real()) << ','
               << format_double(d.measured(k).imag());
        os << "\n";
    }
}

std::vector<calib::Deployment> read_measurements_csv(const std::string& path) {
    auto is = open_in(path);
    std::string line;
    if (!std::getline(is, line))
        throw ParseError(path + ": empty file");
    const auto header = split_csv_line(line);
    const std::vector<std::string> fixed = {"i", "px", "py", "pz", "ox", "oy", "oz"};
    for (std::size_t c = 0; c < fixed.size(); ++c) {
        if (c >= header.size() || header[c] != fixed[c])
            throw ParseError(path + ": missing column '" + fixed[c] + "'");
    }
    if (header.size() < fixed.size() + 2)
        throw ParseError(path + ": missing column 'h1_re'");
    const std::size_t n_cols = header.size() - fixed.size();
    if (n_cols % 2 != 0)
        throw ParseError(path + ": unpaired re/im channel columns");
    const std::size_t n_anchors = n_cols / 2;
    for (std::size_t k = 0; k < n_anchors; ++k) {
        std::ostringstream re, im;
        re << 'h' << (k + 1) << "_re";
        im << 'h' << (k + 1) << "_im";
        if (header[fixed.size() + 2 * k] != re.str())
            throw ParseError(path + ": missing column '" + re.str() + "'");
        if (header[fixed.size() + 2 * k + 1] != im.str())
            throw ParseError(path + ": missing column '" + im.str() + "'");
    }

    std::vector<calib::Deployment> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != header.size()) {
            std::ostringstream oss;
            oss << path << ": line " << lineno << " has " << fields.size() << " fields, expected "
                << header.size();
            throw DimensionMismatchError(oss.str());
        }
        calib::Deployment d;
        d.index = static_cast<int>(parse_field_double(fields[0], lineno, "i"));
        for (int c = 0; c < 3; ++c)
            d.agent_pose.position(c) = parse_field_double(fields[1 + c], lineno, header[1 + c]);
        for (int c = 0; c < 3; ++c)
            d.agent_pose.orientation(c) = parse_field_double(fields[4 + c], lineno, header[4 + c]);
        d.measured.resize(static_cast<Eigen::Index>(n_anchors));
        for (std::size_t k = 0; k < n_anchors; ++k) {
            const double re = parse_field_double(fields[7 + 2 * k], lineno, header[7 + 2 * k]);
            const double im = parse_field_double(fields[8 + 2 * k], lineno, header[8 + 2 * k]);
            d.measured(static_cast<Eigen::Index>(k)) = Complex(re, im);
        }
        out.push_back(std::move(d));
    }
    return out;
}

void write_results_csv(const std::vector<LocalizationRow>& rows, const std::string& path) {
    auto os = open_out(path);
    os << "i,true_px,true_py,true_pz,true_ox,true_oy,true_oz,"
          "est_px,est_py,est_pz,est_ox,est_oy,est_oz,"
          "pos_error_m,orient_error_deg,residual,converged\n";
    for (const auto& r : rows) {
        os << r.index;
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(r.truth.position(c));
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(r.truth.orientation(c));
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(r.estimate.position(c));
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(r.estimate.orientation(c));
        os << ',' << format_double(r.position_error) << ',' << format_double(r.orientation_error)
           << ',' << format_double(r.residual) << ',' << (r.converged ? 1 : 0) << "\n";
    }
}

std::vector<LocalizationRow> read_results_csv(const std::string& path) {
    auto is = open_in(path);
    std::string line;
    if (!std::getline(is, line))
        throw ParseError(path + ": empty file");
    const auto header = split_csv_line(line);
    if (header.size() != 17)
        throw ParseError(path + ": expected 17 result columns");
    std::vector<LocalizationRow> out;
    std::size_t lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty())
            continue;
        const auto f = split_csv_line(line);
        if (f.size() != 17) {
            std::ostringstream oss;
            oss << path << ": line " << lineno << ": expected 17 fields";
            throw DimensionMismatchError(oss.str());
        }
        LocalizationRow r;
        r.index = static_cast<int>(parse_field_double(f[0], lineno, "i"));
        for (int c = 0; c < 3; ++c)
            r.truth.position(c) = parse_field_double(f[1 + c], lineno, header[1 + c]);
        for (int c = 0; c < 3; ++c)
            r.truth.orientation(c) = parse_field_double(f[4 + c], lineno, header[4 + c]);
        for (int c = 0; c < 3; ++c)
            r.estimate.position(c) = parse_field_double(f[7 + c], lineno, header[7 + c]);
        for (int c = 0; c < 3; ++c)
            r.estimate.orientation(c) = parse_field_double(f[10 + c], lineno, header[10 + c]);
        r.position_error = parse_field_double(f[13], lineno, "pos_error_m");
        r.orientation_error = parse_field_double(f[14], lineno, "orient_error_deg");
        r.residual = parse_field_double(f[15], lineno, "residual");
        r.converged = parse_field_double(f[16], lineno, "converged") != 0.0;
        out.push_back(r);
    }
    return out;
}

void write_cdf_csv(const std::vector<std::pair<double, double>>& steps, const std::string& path) {
    auto os = open_out(path);
    os << "value,probability\n";
    for (const auto& [v, p] : steps)
        os << format_double(v) << ',' << format_double(p) << "\n";
}

void write_peb_csv(const std::vector<PebRow>& rows, const std::string& path) {
    auto os = open_out(path);
    os << "i,px,py,pz,ox,oy,oz,peb_m,case\n";
    for (const auto& r : rows) {
        os << r.index;
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(r.pose.position(c));
        for (int c = 0; c < 3; ++c)
            os << ',' << format_double(r.pose.orientation(c));
        os << ',' << format_double(r.peb) << ',' << r.label << "\n";
    }
}

void write_calibration_json(const std::vector<Anchor>& anchors, const std::string& path) {
    json j;
    j["anchors"] = json::array();
    for (const auto& a : anchors) {
        const auto [az, pol] = model::unit_to_spherical(a.pose.orientation);
        json ja;
        ja["xi_re"] = a.matching_factor.real();
        ja["xi_im"] = a.matching_factor.imag();
        ja["b_nlos"] = json::array();
        for (int c = 0; c < 3; ++c)
            ja["b_nlos"].push_back({{"re", a.multipath_field(c).real()},
                                    {"im", a.multipath_field(c).imag()}});
        ja["pos"] = {a.pose.position.x(), a.pose.position.y(), a.pose.position.z()};
        ja["azimuth"] = az;
        ja["polar"] = pol;
        j["anchors"].push_back(ja);
    }
    auto os = open_out(path);
    os << j.dump(2) << "\n";
}

std::vector<Anchor> read_calibration_json(const std::vector<Anchor>& nominal,
                                          const std::string& path) {
    auto is = open_in(path);
    json j;
    try {
        is >> j;
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    if (!j.contains("anchors") || !j["anchors"].is_array())
        throw ParseError(path + ": missing anchors array");
    if (j["anchors"].size() != nominal.size())
        throw DimensionMismatchError(path + ": anchor count mismatch");

    std::vector<Anchor> out = nominal;
    try {
        for (std::size_t i = 0; i < out.size(); ++i) {
            const auto& ja = j["anchors"][i];
            out[i].matching_factor =
                Complex(ja.at("xi_re").get<double>(), ja.at("xi_im").get<double>());
            for (int c = 0; c < 3; ++c)
                out[i].multipath_field(c) = Complex(ja.at("b_nlos")[c].at("re").get<double>(),
                                                    ja.at("b_nlos")[c].at("im").get<double>());
            const auto& pos = ja.at("pos");
            out[i].pose.position = Vec3(pos[0].get<double>(), pos[1].get<double>(),
                                        pos[2].get<double>());
            out[i].pose.orientation = model::spherical_to_unit(ja.at("azimuth").get<double>(),
                                                               ja.at("polar").get<double>());
        }
    } catch (const json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    return out;
}

void write_model_error_csv(const calib::ModelErrorStats& stats, const std::string& path) {
    if (stats.values.size() != stats.links.size())
        throw DimensionMismatchError("model error values and link labels disagree");
    auto os = open_out(path);
    os << "i,anchor,relative_error\n";
    for (std::size_t v = 0; v < stats.values.size(); ++v)
        os << stats.links[v].first << ',' << stats.links[v].second << ','
           << format_double(stats.values[v]) << "\n";
}

} // namespace mi::harness
