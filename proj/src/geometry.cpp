#include "dudospect/geometry.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>
#include <zlib.h>

#include "dudospect/errors.hpp"
#include "dudospect/tensors.hpp"

namespace dudospect {

using nlohmann::json;

double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }

Vec3 normalized(const Vec3& a) {
    const double n = norm(a);
    if (n == 0.0) throw ValidationError("cannot normalize zero vector");
    return (1.0 / n) * a;
}

std::string to_string(ColumnTag tag) {
    switch (tag) {
        case ColumnTag::bottom: return "bottom";
        case ColumnTag::central: return "central";
        case ColumnTag::top: return "top";
    }
    throw ConfigError("unknown column tag");
}

ColumnTag column_tag_from_string(const std::string& s) {
    if (s == "bottom") return ColumnTag::bottom;
    if (s == "central") return ColumnTag::central;
    if (s == "top") return ColumnTag::top;
    throw ConfigError("unknown column tag '" + s + "'");
}

Vec3 DetectorPose::basis_u() const {
    // transaxial direction; aims are never parallel to the cylinder axis
    return normalized(cross(Vec3{0.0, 0.0, 1.0}, aim_direction));
}

Vec3 DetectorPose::basis_v() const {
    return cross(aim_direction, basis_u());
}

int64_t ScannerGeometry::num_bins() const {
    int64_t n = 0;
    for (const auto& d : detectors) n += int64_t(d.bins_u) * d.bins_v;
    return n;
}

int AngleMask::count() const {
    int n = 0;
    for (uint8_t f : flags) n += (f != 0);
    return n;
}

AngleMask AngleMask::complement() const {
    AngleMask out = *this;
    for (auto& f : out.flags) f = f ? 0 : 1;
    return out;
}

ScannerGeometry build_geometry(const GeometryParams& params) {
    for (int d : params.image_size)
        if (d < 8) throw ConfigError("image dimensions must be at least 8");
    for (int d : params.detector_bins)
        if (d < 8) throw ConfigError("detector bin counts must be at least 8");
    if (params.voxel_size_mm <= 0.0 || params.radius_mm <= 0.0 || params.focal_mm <= 0.0)
        throw ConfigError("geometry lengths must be positive");

    ScannerGeometry g;
    g.radius_mm = params.radius_mm;
    g.image_grid.nx = params.image_size[0];
    g.image_grid.ny = params.image_size[1];
    g.image_grid.nz = params.image_size[2];
    g.image_grid.voxel_size_mm = params.voxel_size_mm;
    g.image_grid.origin_mm = {-0.5 * (params.image_size[0] - 1) * params.voxel_size_mm,
                              -0.5 * (params.image_size[1] - 1) * params.voxel_size_mm,
                              -0.5 * (params.image_size[2] - 1) * params.voxel_size_mm};

    // Detector pitch sized so the central-plane FOV projects onto the full
    // detector face: fov * magnification / bins.
    const double magnification = params.focal_mm / params.radius_mm;
    const double fov_mm = params.image_size[0] * params.voxel_size_mm;
    const double pitch = fov_mm * magnification / params.detector_bins[0];

    const double deg = 0.017453292519943295;
    auto make_detector = [&](double azimuth_deg, double z_mm, ColumnTag tag) {
        DetectorPose d;
        const double a = azimuth_deg * deg;
        d.pinhole_position_mm = {params.radius_mm * std::cos(a), params.radius_mm * std::sin(a), z_mm};
        d.aim_direction = normalized(Vec3{0.0, 0.0, 0.0} - d.pinhole_position_mm);
        d.bins_u = params.detector_bins[0];
        d.bins_v = params.detector_bins[1];
        d.pixel_pitch_mm = pitch;
        d.focal_mm = params.focal_mm;
        d.column_tag = tag;
        return d;
    };

    // index layout: 0-4 bottom, 5-13 central, 14-18 top
    const int n_outer = 5, n_central = 9;
    for (int i = 0; i < n_outer; ++i) {
        const double az = -0.5 * params.outer_arc_deg + i * params.outer_arc_deg / (n_outer - 1);
        g.detectors.push_back(make_detector(az, -params.outer_column_z_mm, ColumnTag::bottom));
    }
    for (int i = 0; i < n_central; ++i) {
        const double az = -0.5 * params.central_arc_deg + i * params.central_arc_deg / (n_central - 1);
        g.detectors.push_back(make_detector(az, 0.0, ColumnTag::central));
    }
    for (int i = 0; i < n_outer; ++i) {
        const double az = -0.5 * params.outer_arc_deg + i * params.outer_arc_deg / (n_outer - 1);
        g.detectors.push_back(make_detector(az, params.outer_column_z_mm, ColumnTag::top));
    }

    validate_geometry(g);
    return g;
}

ScannerGeometry build_default_geometry(const std::array<int, 3>& image_size,
                                       const std::array<int, 2>& detector_bins) {
    GeometryParams params;
    params.image_size = image_size;
    params.detector_bins = detector_bins;
    return build_geometry(params);
}

void validate_geometry(const ScannerGeometry& g) {
    if (g.detectors.empty()) throw ConfigError("geometry has no detectors");
    for (const auto& d : g.detectors) {
        if (d.bins_u < 1 || d.bins_v < 1) throw ConfigError("detector bin counts must be >= 1");
        if (std::abs(norm(d.aim_direction) - 1.0) > 1e-9)
            throw ConfigError("detector aim direction must be unit length");
        const double r = std::hypot(d.pinhole_position_mm[0], d.pinhole_position_mm[1]);
        if (std::abs(r - g.radius_mm) > 1e-9 * g.radius_mm)
            throw ConfigError("pinhole does not lie on the scanner cylinder");
    }
    if (g.image_grid.nx < 1 || g.image_grid.ny < 1 || g.image_grid.nz < 1 ||
        g.image_grid.voxel_size_mm <= 0.0)
        throw ConfigError("invalid image grid");
}

AngleMask central_column_mask(const ScannerGeometry& geometry) {
    AngleMask mask;
    mask.flags.reserve(geometry.detectors.size());
    for (const auto& d : geometry.detectors)
        mask.flags.push_back(d.column_tag == ColumnTag::central ? 1 : 0);
    return mask;
}

static json vec3_to_json(const Vec3& v) { return json::array({v[0], v[1], v[2]}); }

static Vec3 vec3_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw IoError("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

std::string ScannerGeometry::to_json_string() const {
    json j;
    j["format"] = "dudospect-geometry-v1";
    j["radius_mm"] = radius_mm;
    j["grid"] = {{"nx", image_grid.nx},
                 {"ny", image_grid.ny},
                 {"nz", image_grid.nz},
                 {"voxel_size_mm", image_grid.voxel_size_mm},
                 {"origin_mm", vec3_to_json(image_grid.origin_mm)}};
    json dets = json::array();
    for (const auto& d : detectors) {
        dets.push_back({{"position_mm", vec3_to_json(d.pinhole_position_mm)},
                        {"aim", vec3_to_json(d.aim_direction)},
                        {"bins_u", d.bins_u},
                        {"bins_v", d.bins_v},
                        {"pixel_pitch_mm", d.pixel_pitch_mm},
                        {"focal_mm", d.focal_mm},
                        {"column", to_string(d.column_tag)}});
    }
    j["detectors"] = std::move(dets);
    return j.dump(2);
}

ScannerGeometry ScannerGeometry::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw IoError(std::string("geometry JSON parse failure: ") + e.what());
    }
    ScannerGeometry g;
    g.radius_mm = j.at("radius_mm").get<double>();
    const auto& grid = j.at("grid");
    g.image_grid.nx = grid.at("nx").get<int>();
    g.image_grid.ny = grid.at("ny").get<int>();
    g.image_grid.nz = grid.at("nz").get<int>();
    g.image_grid.voxel_size_mm = grid.at("voxel_size_mm").get<double>();
    g.image_grid.origin_mm = vec3_from_json(grid.at("origin_mm"));
    for (const auto& dj : j.at("detectors")) {
        DetectorPose d;
        d.pinhole_position_mm = vec3_from_json(dj.at("position_mm"));
        d.aim_direction = vec3_from_json(dj.at("aim"));
        d.bins_u = dj.at("bins_u").get<int>();
        d.bins_v = dj.at("bins_v").get<int>();
        d.pixel_pitch_mm = dj.at("pixel_pitch_mm").get<double>();
        d.focal_mm = dj.at("focal_mm").get<double>();
        d.column_tag = column_tag_from_string(dj.at("column").get<std::string>());
        g.detectors.push_back(d);
    }
    validate_geometry(g);
    return g;
}

std::string ScannerGeometry::id() const {
    const std::string text = to_json_string();
    const auto crc = crc32(0L, reinterpret_cast<const Bytef*>(text.data()),
                           static_cast<uInt>(text.size()));
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%08lx", static_cast<unsigned long>(crc));
    return buf;
}

void ScannerGeometry::save_json(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open '" + path + "' for writing");
    out << to_json_string() << "\n";
    if (!out) throw IoError("failed writing geometry to '" + path + "'");
}

ScannerGeometry ScannerGeometry::load_json(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open geometry file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

}  // namespace dudospect
