#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dudospect/geometry.hpp"

namespace dudospect {

// 3D activity (or attenuation) image on a GridSpec. C-order (nx, ny, nz).
struct VolumeTensor {
    std::vector<double> data;
    GridSpec grid;

    static VolumeTensor zeros(const GridSpec& grid) {
        return VolumeTensor{std::vector<double>(static_cast<size_t>(grid.num_voxels()), 0.0), grid};
    }
    double& at(int ix, int iy, int iz) {
        return data[(static_cast<size_t>(ix) * grid.ny + iy) * grid.nz + iz];
    }
    double at(int ix, int iy, int iz) const {
        return data[(static_cast<size_t>(ix) * grid.ny + iy) * grid.nz + iz];
    }
    double sum() const;
    bool all_finite() const;
};

// Per-detector 2D count/intensity maps stacked along the angle axis.
// C-order (bins_u, bins_v, n_angles): the angle index varies fastest.
struct ProjectionTensor {
    std::vector<double> data;
    int bins_u = 0, bins_v = 0, n_angles = 0;
    std::string geometry_id;

    static ProjectionTensor zeros(int bins_u, int bins_v, int n_angles, std::string geometry_id = {}) {
        ProjectionTensor p;
        p.bins_u = bins_u;
        p.bins_v = bins_v;
        p.n_angles = n_angles;
        p.geometry_id = std::move(geometry_id);
        p.data.assign(static_cast<size_t>(bins_u) * bins_v * n_angles, 0.0);
        return p;
    }
    static ProjectionTensor zeros_like(const ProjectionTensor& other) {
        return zeros(other.bins_u, other.bins_v, other.n_angles, other.geometry_id);
    }
    int64_t num_bins() const { return int64_t(bins_u) * bins_v * n_angles; }
    double& at(int iu, int iv, int a) {
        return data[(static_cast<size_t>(iu) * bins_v + iv) * n_angles + a];
    }
    double at(int iu, int iv, int a) const {
        return data[(static_cast<size_t>(iu) * bins_v + iv) * n_angles + a];
    }
    double sum() const;
    // Sum over one detector's 2D map.
    double angle_sum(int a) const;
    bool all_finite() const;
    bool same_shape(const ProjectionTensor& other) const {
        return bins_u == other.bins_u && bins_v == other.bins_v && n_angles == other.n_angles;
    }
};

enum class MaskMode { zero_fill, drop };

// Few-angle selection. zero_fill keeps the 19-angle layout and zeroes the
// masked-out detectors (network-facing); drop removes them (recon-facing).
ProjectionTensor apply_angle_mask(const ProjectionTensor& p, const AngleMask& mask, MaskMode mode);

}  // namespace dudospect
