#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace dudospect {

using Vec3 = std::array<double, 3>;

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
    return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
double norm(const Vec3& a);
Vec3 normalized(const Vec3& a);

// Voxel grid. origin_mm is the center of voxel (0,0,0); data is C-ordered
// with shape (nx, ny, nz), so the z index varies fastest.
struct GridSpec {
    int nx = 0, ny = 0, nz = 0;
    double voxel_size_mm = 0.0;
    Vec3 origin_mm{0.0, 0.0, 0.0};

    int64_t num_voxels() const { return int64_t(nx) * ny * nz; }
    bool operator==(const GridSpec&) const = default;
};

enum class ColumnTag { bottom, central, top };

std::string to_string(ColumnTag tag);
ColumnTag column_tag_from_string(const std::string& s);

// One pinhole camera. The detector plane sits focal_mm behind the pinhole
// (opposite to aim_direction); rays run from detector bin centers through
// the pinhole into the volume.
struct DetectorPose {
    Vec3 pinhole_position_mm{0.0, 0.0, 0.0};
    Vec3 aim_direction{1.0, 0.0, 0.0};  // unit vector, pinhole -> volume
    int bins_u = 0, bins_v = 0;
    double pixel_pitch_mm = 0.0;
    double focal_mm = 0.0;  // pinhole-to-detector-plane distance
    ColumnTag column_tag = ColumnTag::central;

    // In-plane detector basis, derived deterministically from the aim.
    Vec3 basis_u() const;
    Vec3 basis_v() const;
};

// Full scanner layout plus the reconstruction grid. Detector ordering is
// fixed: indices 0-4 bottom column, 5-13 central, 14-18 top.
struct ScannerGeometry {
    std::vector<DetectorPose> detectors;
    double radius_mm = 0.0;
    GridSpec image_grid;

    int num_detectors() const { return static_cast<int>(detectors.size()); }
    // Total detector bins across all heads.
    int64_t num_bins() const;
    // Stable content hash, used to tag projection tensors.
    std::string id() const;

    std::string to_json_string() const;
    static ScannerGeometry from_json_string(const std::string& text);
    void save_json(const std::string& path) const;
    static ScannerGeometry load_json(const std::string& path);
};

// Binary per-detector mask (the few-angle selector).
struct AngleMask {
    std::vector<uint8_t> flags;

    int size() const { return static_cast<int>(flags.size()); }
    int count() const;
    bool at(int i) const { return flags[static_cast<size_t>(i)] != 0; }
    AngleMask complement() const;
    static AngleMask all_true(int n) { return AngleMask{std::vector<uint8_t>(static_cast<size_t>(n), 1)}; }
};

struct GeometryParams {
    std::array<int, 3> image_size{32, 32, 32};
    std::array<int, 2> detector_bins{32, 32};
    double voxel_size_mm = 4.0;
    double radius_mm = 160.0;
    double focal_mm = 140.0;
    double outer_column_z_mm = 70.0;
    // Azimuth arcs (degrees, symmetric around 0 == +x axis).
    double central_arc_deg = 180.0;
    double outer_arc_deg = 144.0;
};

// 19 pinholes in three columns (5 bottom, 9 central, 5 top) on a cylinder
// around the z axis. Central-column aims span the transaxial arc; outer
// columns sit at +-outer_column_z_mm and aim back at the origin.
// Deterministic; throws ConfigError if any dimension is below 8.
ScannerGeometry build_default_geometry(const std::array<int, 3>& image_size,
                                       const std::array<int, 2>& detector_bins);
ScannerGeometry build_geometry(const GeometryParams& params);

// Mask that selects exactly the central-column detectors.
AngleMask central_column_mask(const ScannerGeometry& geometry);

void validate_geometry(const ScannerGeometry& geometry);

}  // namespace dudospect
