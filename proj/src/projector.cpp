#include "dudospect/projector.hpp"

#include <algorithm>
#include <cmath>

#include "dudospect/errors.hpp"

namespace dudospect {

SystemOperator make_system_operator(ScannerGeometry geometry,
                                    std::optional<VolumeTensor> attenuation, int sampling) {
    if (sampling < 1) throw ConfigError("sampling must be >= 1");
    if (attenuation && !(attenuation->grid == geometry.image_grid))
        throw ShapeError("attenuation volume grid does not match the image grid");
    return SystemOperator{std::move(geometry), std::move(attenuation), sampling};
}

namespace {

struct RaySegment {
    Vec3 origin;  // pinhole
    Vec3 dir;     // unit, pointing into the volume
    double s0 = 0.0, s1 = 0.0;
    bool valid = false;
};

// Clip the half-line origin + s*dir (s >= 0) against the grid bounding box.
RaySegment clip_to_grid(const Vec3& origin, const Vec3& dir, const GridSpec& grid) {
    RaySegment seg{origin, dir, 0.0, 0.0, false};
    double s_lo = 0.0;
    double s_hi = std::numeric_limits<double>::infinity();
    const double half = 0.5 * grid.voxel_size_mm;
    const int dims[3] = {grid.nx, grid.ny, grid.nz};
    for (int ax = 0; ax < 3; ++ax) {
        const double lo = grid.origin_mm[ax] - half;
        const double hi = grid.origin_mm[ax] + (dims[ax] - 0.5) * grid.voxel_size_mm;
        if (std::abs(dir[ax]) < 1e-12) {
            if (origin[ax] < lo || origin[ax] > hi) return seg;
            continue;
        }
        double t0 = (lo - origin[ax]) / dir[ax];
        double t1 = (hi - origin[ax]) / dir[ax];
        if (t0 > t1) std::swap(t0, t1);
        s_lo = std::max(s_lo, t0);
        s_hi = std::min(s_hi, t1);
    }
    if (s_hi <= s_lo) return seg;
    seg.s0 = s_lo;
    seg.s1 = s_hi;
    seg.valid = true;
    return seg;
}

struct TrilinearStencil {
    int64_t idx[8];
    double w[8];
    int n = 0;
};

// Trilinear interpolation stencil at a world point; out-of-grid corners
// contribute nothing (zero padding).
inline TrilinearStencil stencil_at(const Vec3& p, const GridSpec& grid) {
    TrilinearStencil st;
    const double inv = 1.0 / grid.voxel_size_mm;
    const double fx = (p[0] - grid.origin_mm[0]) * inv;
    const double fy = (p[1] - grid.origin_mm[1]) * inv;
    const double fz = (p[2] - grid.origin_mm[2]) * inv;
    const int ix = static_cast<int>(std::floor(fx));
    const int iy = static_cast<int>(std::floor(fy));
    const int iz = static_cast<int>(std::floor(fz));
    const double ax = fx - ix, ay = fy - iy, az = fz - iz;
    const double wx[2] = {1.0 - ax, ax};
    const double wy[2] = {1.0 - ay, ay};
    const double wz[2] = {1.0 - az, az};
    for (int dx = 0; dx < 2; ++dx) {
        const int cx = ix + dx;
        if (cx < 0 || cx >= grid.nx) continue;
        for (int dy = 0; dy < 2; ++dy) {
            const int cy = iy + dy;
            if (cy < 0 || cy >= grid.ny) continue;
            for (int dz = 0; dz < 2; ++dz) {
                const int cz = iz + dz;
                if (cz < 0 || cz >= grid.nz) continue;
                const double w = wx[dx] * wy[dy] * wz[dz];
                if (w == 0.0) continue;
                st.idx[st.n] = (static_cast<int64_t>(cx) * grid.ny + cy) * grid.nz + cz;
                st.w[st.n] = w;
                ++st.n;
            }
        }
    }
    return st;
}

// Walks every sample point of every ray of one detector in a fixed order.
// visit(bin_index_in_detector, voxel_stencil, weight) where weight already
// includes the step length and the attenuation factor.
template <class Visit>
void traverse_detector(const SystemOperator& op, int det_index, Visit&& visit) {
    const auto& d = op.geometry.detectors[static_cast<size_t>(det_index)];
    const auto& grid = op.geometry.image_grid;
    const Vec3 eu = d.basis_u();
    const Vec3 ev = d.basis_v();
    const Vec3 det_center = d.pinhole_position_mm - d.focal_mm * d.aim_direction;
    const double step = 0.5 * grid.voxel_size_mm;
    const int s = op.sampling;
    const double inv_rays = 1.0 / (s * s);
    const double* mu = op.attenuation ? op.attenuation->data.data() : nullptr;

    for (int iu = 0; iu < d.bins_u; ++iu) {
        for (int iv = 0; iv < d.bins_v; ++iv) {
            const int bin = iu * d.bins_v + iv;
            for (int su = 0; su < s; ++su) {
                for (int sv = 0; sv < s; ++sv) {
                    const double du = (iu - 0.5 * (d.bins_u - 1) + (su + 0.5) / s - 0.5) * d.pixel_pitch_mm;
                    const double dv = (iv - 0.5 * (d.bins_v - 1) + (sv + 0.5) / s - 0.5) * d.pixel_pitch_mm;
                    const Vec3 bin_pos = det_center + du * eu + dv * ev;
                    const Vec3 dir = normalized(d.pinhole_position_mm - bin_pos);
                    const RaySegment seg = clip_to_grid(d.pinhole_position_mm, dir, grid);
                    if (!seg.valid) continue;
                    const int n_steps = static_cast<int>(std::floor((seg.s1 - seg.s0) / step));
                    double mu_acc = 0.0;
                    for (int k = 0; k < n_steps; ++k) {
                        const double t = seg.s0 + (k + 0.5) * step;
                        const Vec3 p = seg.origin + t * dir;
                        const TrilinearStencil st = stencil_at(p, grid);
                        double w = step * inv_rays;
                        if (mu) {
                            // attenuation along the already-traversed path
                            // between this sample and the pinhole side
                            w *= std::exp(-mu_acc);
                            double mu_here = 0.0;
                            for (int i = 0; i < st.n; ++i) mu_here += st.w[i] * mu[st.idx[i]];
                            mu_acc += mu_here * step;
                        }
                        visit(bin, st, w);
                    }
                }
            }
        }
    }
}

void check_volume(const SystemOperator& op, const VolumeTensor& x) {
    if (!(x.grid == op.geometry.image_grid))
        throw ShapeError("volume grid does not match the operator geometry");
    if (!x.all_finite()) throw ValidationError("volume contains non-finite values");
}

void check_projection(const SystemOperator& op, const ProjectionTensor& p) {
    const auto& dets = op.geometry.detectors;
    if (p.n_angles != static_cast<int>(dets.size()) || dets.empty() ||
        p.bins_u != dets[0].bins_u || p.bins_v != dets[0].bins_v)
        throw ShapeError("projection shape does not match the operator geometry");
    if (!p.all_finite()) throw ValidationError("projection contains non-finite values");
}

}  // namespace

ProjectionTensor forward_project_masked(const SystemOperator& op, const VolumeTensor& x,
                                        const AngleMask& mask) {
    check_volume(op, x);
    const auto& dets = op.geometry.detectors;
    if (mask.size() != static_cast<int>(dets.size()))
        throw ShapeError("angle mask length does not match the detector count");
    ProjectionTensor out =
        ProjectionTensor::zeros(dets[0].bins_u, dets[0].bins_v, static_cast<int>(dets.size()),
                                op.geometry.id());
    const double* vol = x.data.data();
    for (int det = 0; det < static_cast<int>(dets.size()); ++det) {
        if (!mask.at(det)) continue;
        double* slab = out.data.data();
        const int n_angles = out.n_angles;
        traverse_detector(op, det, [&](int bin, const TrilinearStencil& st, double w) {
            double v = 0.0;
            for (int i = 0; i < st.n; ++i) v += st.w[i] * vol[st.idx[i]];
            slab[static_cast<size_t>(bin) * n_angles + det] += w * v;
        });
    }
    return out;
}

ProjectionTensor forward_project(const SystemOperator& op, const VolumeTensor& x) {
    return forward_project_masked(op, x, AngleMask::all_true(op.geometry.num_detectors()));
}

VolumeTensor back_project_masked(const SystemOperator& op, const ProjectionTensor& p,
                                 const AngleMask& mask) {
    check_projection(op, p);
    if (mask.size() != p.n_angles)
        throw ShapeError("angle mask length does not match the detector count");
    VolumeTensor out = VolumeTensor::zeros(op.geometry.image_grid);
    double* vol = out.data.data();
    const double* proj = p.data.data();
    const int n_angles = p.n_angles;
    for (int det = 0; det < p.n_angles; ++det) {
        if (!mask.at(det)) continue;
        traverse_detector(op, det, [&](int bin, const TrilinearStencil& st, double w) {
            const double v = w * proj[static_cast<size_t>(bin) * n_angles + det];
            for (int i = 0; i < st.n; ++i) vol[st.idx[i]] += st.w[i] * v;
        });
    }
    return out;
}

VolumeTensor back_project(const SystemOperator& op, const ProjectionTensor& p) {
    return back_project_masked(op, p, AngleMask::all_true(p.n_angles));
}

VolumeTensor sensitivity_image(const SystemOperator& op, const AngleMask& mask) {
    const auto& dets = op.geometry.detectors;
    if (dets.empty()) throw ConfigError("operator has no detectors");
    ProjectionTensor ones =
        ProjectionTensor::zeros(dets[0].bins_u, dets[0].bins_v, static_cast<int>(dets.size()),
                                op.geometry.id());
    std::fill(ones.data.begin(), ones.data.end(), 1.0);
    return back_project_masked(op, ones, mask);
}

}  // namespace dudospect
