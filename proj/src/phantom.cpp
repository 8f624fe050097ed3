#include "dudospect/phantom.hpp"

#include <cmath>

#include "dudospect/errors.hpp"
#include "dudospect/rng.hpp"

namespace dudospect {

std::string to_string(PhantomFamily family) {
    switch (family) {
        case PhantomFamily::cardiac_ellipsoid: return "cardiac_ellipsoid";
        case PhantomFamily::hot_spheres: return "hot_spheres";
        case PhantomFamily::uniform_cylinder: return "uniform_cylinder";
    }
    throw ConfigError("unknown phantom family");
}

PhantomFamily phantom_family_from_string(const std::string& s) {
    if (s == "cardiac_ellipsoid") return PhantomFamily::cardiac_ellipsoid;
    if (s == "hot_spheres") return PhantomFamily::hot_spheres;
    if (s == "uniform_cylinder") return PhantomFamily::uniform_cylinder;
    throw ConfigError("unknown phantom family '" + s + "'");
}

namespace {

Vec3 voxel_center(const GridSpec& grid, int ix, int iy, int iz) {
    return {grid.origin_mm[0] + ix * grid.voxel_size_mm,
            grid.origin_mm[1] + iy * grid.voxel_size_mm,
            grid.origin_mm[2] + iz * grid.voxel_size_mm};
}

Vec3 grid_extent(const GridSpec& grid) {
    return {grid.nx * grid.voxel_size_mm, grid.ny * grid.voxel_size_mm,
            grid.nz * grid.voxel_size_mm};
}

// Rotation around z by angle a (radians) applied to p.
Vec3 rotate_z(const Vec3& p, double a) {
    const double c = std::cos(a), s = std::sin(a);
    return {c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]};
}

void check_defect_inside(const DefectSpec& d, const GridSpec& grid) {
    const Vec3 ext = grid_extent(grid);
    for (int ax = 0; ax < 3; ++ax) {
        const double lo = grid.origin_mm[ax] - 0.5 * grid.voxel_size_mm;
        const double hi = lo + ext[ax];
        if (d.position_mm[ax] < lo || d.position_mm[ax] > hi)
            throw ValidationError("defect center lies outside the image grid");
    }
    if (d.severity < 0.0 || d.severity > 1.0)
        throw ValidationError("defect severity must lie in [0, 1]");
}

VolumeTensor cardiac_phantom(const PhantomSpec& spec, const GridSpec& grid) {
    if (spec.myocardium_to_background_ratio <= 1.0)
        throw ValidationError("cardiac phantom requires myocardium:background ratio > 1");
    Rng rng(spec.rng_seed);
    const Vec3 ext = grid_extent(grid);
    const double scale = std::min({ext[0], ext[1], ext[2]});

    // seeded pose jitter: small shift and in-plane rotation
    const Vec3 shift{rng.next_uniform(-0.04, 0.04) * scale, rng.next_uniform(-0.04, 0.04) * scale,
                     rng.next_uniform(-0.04, 0.04) * scale};
    const double rot = rng.next_uniform(-0.35, 0.35);
    const double wall = (0.07 + 0.02 * rng.next_double()) * scale;   // wall thickness
    const double r_out = (0.22 + 0.03 * rng.next_double()) * scale;  // outer short radius
    const double elong = 1.35 + 0.2 * rng.next_double();             // long-axis stretch

    const double body_r = 0.42 * scale;
    const double myo = spec.myocardium_to_background_ratio;

    VolumeTensor out = VolumeTensor::zeros(grid);
    for (int ix = 0; ix < grid.nx; ++ix) {
        for (int iy = 0; iy < grid.ny; ++iy) {
            for (int iz = 0; iz < grid.nz; ++iz) {
                const Vec3 p = voxel_center(grid, ix, iy, iz);
                double value = 0.0;
                const double body_hz = 0.45 * scale;
                const double body = (p[0] * p[0] + p[1] * p[1]) / (body_r * body_r) +
                                    p[2] * p[2] / (body_hz * body_hz);
                if (body <= 1.0) value = 1.0;

                // left-ventricle-like shell, rotated and shifted
                const Vec3 q = rotate_z(p - shift, rot);
                const double ro = std::sqrt(q[0] * q[0] + q[1] * q[1] + (q[2] * q[2]) / (elong * elong));
                if (ro <= r_out && ro >= r_out - wall && q[2] < 0.55 * elong * r_out)
                    value = myo;
                out.at(ix, iy, iz) = value;
            }
        }
    }

    if (spec.defect) {
        check_defect_inside(*spec.defect, grid);
        const DefectSpec& d = *spec.defect;
        for (int ix = 0; ix < grid.nx; ++ix)
            for (int iy = 0; iy < grid.ny; ++iy)
                for (int iz = 0; iz < grid.nz; ++iz) {
                    const Vec3 p = voxel_center(grid, ix, iy, iz);
                    const Vec3 r = p - d.position_mm;
                    if (dot(r, r) <= d.radius_mm * d.radius_mm && out.at(ix, iy, iz) >= myo)
                        out.at(ix, iy, iz) *= (1.0 - d.severity);
                }
    }
    return out;
}

VolumeTensor spheres_phantom(const PhantomSpec& spec, const GridSpec& grid) {
    Rng rng(spec.rng_seed);
    const Vec3 ext = grid_extent(grid);
    const double scale = std::min({ext[0], ext[1], ext[2]});
    const double bg_r = 0.42 * scale;
    const int n_spheres = 3 + static_cast<int>(rng.next_below(3));
    std::vector<Vec3> centers;
    std::vector<double> radii;
    for (int i = 0; i < n_spheres; ++i) {
        centers.push_back({rng.next_uniform(-0.25, 0.25) * scale, rng.next_uniform(-0.25, 0.25) * scale,
                           rng.next_uniform(-0.25, 0.25) * scale});
        radii.push_back((0.04 + 0.06 * rng.next_double()) * scale);
    }
    const double hot = std::max(2.0, spec.myocardium_to_background_ratio);

    VolumeTensor out = VolumeTensor::zeros(grid);
    for (int ix = 0; ix < grid.nx; ++ix)
        for (int iy = 0; iy < grid.ny; ++iy)
            for (int iz = 0; iz < grid.nz; ++iz) {
                const Vec3 p = voxel_center(grid, ix, iy, iz);
                double value = 0.0;
                if (p[0] * p[0] + p[1] * p[1] + p[2] * p[2] <= bg_r * bg_r) value = 1.0;
                for (int i = 0; i < n_spheres; ++i) {
                    const Vec3 r = p - centers[static_cast<size_t>(i)];
                    if (dot(r, r) <= radii[static_cast<size_t>(i)] * radii[static_cast<size_t>(i)])
                        value = hot;
                }
                out.at(ix, iy, iz) = value;
            }
    return out;
}

VolumeTensor cylinder_phantom(const GridSpec& grid) {
    const Vec3 ext = grid_extent(grid);
    const double r = 0.4 * std::min(ext[0], ext[1]);
    const double half_h = 0.4 * ext[2];
    VolumeTensor out = VolumeTensor::zeros(grid);
    for (int ix = 0; ix < grid.nx; ++ix)
        for (int iy = 0; iy < grid.ny; ++iy)
            for (int iz = 0; iz < grid.nz; ++iz) {
                const Vec3 p = voxel_center(grid, ix, iy, iz);
                if (p[0] * p[0] + p[1] * p[1] <= r * r && std::abs(p[2]) <= half_h)
                    out.at(ix, iy, iz) = 1.0;
            }
    return out;
}

}  // namespace

VolumeTensor generate_phantom(const PhantomSpec& spec, const GridSpec& grid) {
    if (grid.nx < 1 || grid.ny < 1 || grid.nz < 1 || grid.voxel_size_mm <= 0.0)
        throw ConfigError("invalid grid for phantom generation");
    switch (spec.family) {
        case PhantomFamily::cardiac_ellipsoid: return cardiac_phantom(spec, grid);
        case PhantomFamily::hot_spheres: return spheres_phantom(spec, grid);
        case PhantomFamily::uniform_cylinder: return cylinder_phantom(grid);
    }
    throw ConfigError("unknown phantom family");
}

ProjectionTensor poisson_emit(const ProjectionTensor& p_clean, uint64_t total_counts,
                              uint64_t rng_seed) {
    if (total_counts == 0) throw ValidationError("total_counts must be positive");
    if (!p_clean.all_finite()) throw ValidationError("clean projection contains non-finite values");
    double total = 0.0;
    for (double v : p_clean.data) {
        if (v < 0.0) throw ValidationError("clean projection must be nonnegative");
        total += v;
    }
    if (total <= 0.0) throw ValidationError("clean projection is identically zero");

    const double scale = static_cast<double>(total_counts) / total;
    Rng rng(rng_seed);
    ProjectionTensor out = ProjectionTensor::zeros_like(p_clean);
    for (size_t i = 0; i < p_clean.data.size(); ++i) {
        const double lambda = scale * p_clean.data[i];
        out.data[i] = lambda > 0.0 ? static_cast<double>(rng.next_poisson(lambda)) : 0.0;
    }
    return out;
}

ProjectionTensor thin_counts(const ProjectionTensor& p_counts, double dose_ratio,
                             uint64_t rng_seed) {
    if (!(dose_ratio > 0.0 && dose_ratio <= 1.0))
        throw ValidationError("dose_ratio must lie in (0, 1]");
    for (double v : p_counts.data) {
        if (!(v >= 0.0) || v != std::floor(v))
            throw ValidationError("thinning requires nonnegative integer counts");
    }
    if (dose_ratio == 1.0) return p_counts;
    Rng rng(rng_seed);
    ProjectionTensor out = ProjectionTensor::zeros_like(p_counts);
    for (size_t i = 0; i < p_counts.data.size(); ++i) {
        const auto n = static_cast<uint64_t>(p_counts.data[i]);
        out.data[i] = n > 0 ? static_cast<double>(rng.next_binomial(n, dose_ratio)) : 0.0;
    }
    return out;
}

}  // namespace dudospect
