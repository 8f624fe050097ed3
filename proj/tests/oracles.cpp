#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace dudospect::oracles {

namespace {

// trilinear basis of voxel (ix,iy,iz) evaluated at world point p
double hat_weight(const GridSpec& grid, int ix, int iy, int iz, const Vec3& p) {
    double w = 1.0;
    const int idx[3] = {ix, iy, iz};
    for (int ax = 0; ax < 3; ++ax) {
        const double u = (p[ax] - grid.origin_mm[ax]) / grid.voxel_size_mm;
        const double d = std::abs(u - idx[ax]);
        if (d >= 1.0) return 0.0;
        w *= 1.0 - d;
    }
    return w;
}

}  // namespace

ProjectionTensor point_source_projection(const ScannerGeometry& geometry, int ix, int iy, int iz) {
    const GridSpec& grid = geometry.image_grid;
    const auto& d0 = geometry.detectors[0];
    ProjectionTensor out =
        ProjectionTensor::zeros(d0.bins_u, d0.bins_v, geometry.num_detectors(), geometry.id());
    const double step = 0.5 * grid.voxel_size_mm;

    for (int det = 0; det < geometry.num_detectors(); ++det) {
        const DetectorPose& dp = geometry.detectors[static_cast<size_t>(det)];
        // rebuild the detector frame from first principles
        const Vec3 aim = dp.aim_direction;
        const Vec3 eu = normalized(cross(Vec3{0, 0, 1}, aim));
        const Vec3 ev = cross(aim, eu);
        const Vec3 det_center = dp.pinhole_position_mm - dp.focal_mm * aim;
        for (int iu = 0; iu < dp.bins_u; ++iu) {
            for (int iv = 0; iv < dp.bins_v; ++iv) {
                const double du = (iu - 0.5 * (dp.bins_u - 1)) * dp.pixel_pitch_mm;
                const double dv = (iv - 0.5 * (dp.bins_v - 1)) * dp.pixel_pitch_mm;
                const Vec3 bin_pos = det_center + du * eu + dv * ev;
                const Vec3 dir = normalized(dp.pinhole_position_mm - bin_pos);
                // clip to the voxel-aligned bounding box
                double s_lo = 0.0, s_hi = std::numeric_limits<double>::infinity();
                bool miss = false;
                for (int ax = 0; ax < 3; ++ax) {
                    const double lo = grid.origin_mm[ax] - 0.5 * grid.voxel_size_mm;
                    const int dims[3] = {grid.nx, grid.ny, grid.nz};
                    const double hi = grid.origin_mm[ax] + (dims[ax] - 0.5) * grid.voxel_size_mm;
                    const double o = dp.pinhole_position_mm[ax];
                    if (std::abs(dir[ax]) < 1e-12) {
                        if (o < lo || o > hi) miss = true;
                        continue;
                    }
                    double t0 = (lo - o) / dir[ax];
                    double t1 = (hi - o) / dir[ax];
                    if (t0 > t1) std::swap(t0, t1);
                    s_lo = std::max(s_lo, t0);
                    s_hi = std::min(s_hi, t1);
                }
                if (miss || s_hi <= s_lo) continue;
                const int n_steps = static_cast<int>(std::floor((s_hi - s_lo) / step));
                double acc = 0.0;
                for (int k = 0; k < n_steps; ++k) {
                    const double t = s_lo + (k + 0.5) * step;
                    const Vec3 p = dp.pinhole_position_mm + t * dir;
                    acc += hat_weight(grid, ix, iy, iz, p) * step;
                }
                out.at(iu, iv, det) = acc;
            }
        }
    }
    return out;
}

double nmse_formula(const std::vector<double>& pred, const std::vector<double>& ref) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        num += (pred[i] - ref[i]) * (pred[i] - ref[i]);
        den += ref[i] * ref[i];
    }
    return num / den;
}

double nmae_formula(const std::vector<double>& pred, const std::vector<double>& ref) {
    double num = 0.0, den = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) {
        num += std::abs(pred[i] - ref[i]);
        den += std::abs(ref[i]);
    }
    return num / den;
}

double psnr_formula(const std::vector<double>& pred, const std::vector<double>& ref) {
    double peak = *std::max_element(ref.begin(), ref.end());
    double mse = 0.0;
    for (size_t i = 0; i < pred.size(); ++i) mse += (pred[i] - ref[i]) * (pred[i] - ref[i]);
    mse /= static_cast<double>(pred.size());
    if (mse == 0.0) return 200.0;
    return std::min(200.0, 20.0 * std::log10(peak / std::sqrt(mse)));
}

double ssim_bruteforce(const std::vector<double>& pred, const std::vector<double>& ref, int nx,
                       int ny, int nz) {
    const int half = 5;
    const double sigma = 1.5;
    double lo = 1e300, hi = -1e300;
    for (double v : pred) { lo = std::min(lo, v); hi = std::max(hi, v); }
    for (double v : ref) { lo = std::min(lo, v); hi = std::max(hi, v); }
    const double range = hi - lo;
    if (range == 0.0) return 1.0;
    const double c1 = (0.01 * range) * (0.01 * range);
    const double c2 = (0.03 * range) * (0.03 * range);
    auto idx = [&](int x, int y, int z) { return (static_cast<size_t>(x) * ny + y) * nz + z; };
    auto g1 = [&](int k) { return std::exp(-0.5 * k * k / (sigma * sigma)); };

    double acc = 0.0;
    for (int x = 0; x < nx; ++x)
        for (int y = 0; y < ny; ++y)
            for (int z = 0; z < nz; ++z) {
                double wsum = 0.0, mx = 0.0, my = 0.0, mxx = 0.0, myy = 0.0, mxy = 0.0;
                for (int a = std::max(0, x - half); a <= std::min(nx - 1, x + half); ++a)
                    for (int b = std::max(0, y - half); b <= std::min(ny - 1, y + half); ++b)
                        for (int c = std::max(0, z - half); c <= std::min(nz - 1, z + half); ++c) {
                            const double w = g1(a - x) * g1(b - y) * g1(c - z);
                            const double xv = pred[idx(a, b, c)];
                            const double yv = ref[idx(a, b, c)];
                            wsum += w;
                            mx += w * xv;
                            my += w * yv;
                            mxx += w * xv * xv;
                            myy += w * yv * yv;
                            mxy += w * xv * yv;
                        }
                mx /= wsum;
                my /= wsum;
                const double vx = std::max(0.0, mxx / wsum - mx * mx);
                const double vy = std::max(0.0, myy / wsum - my * my);
                const double cov = mxy / wsum - mx * my;
                acc += ((2 * mx * my + c1) * (2 * cov + c2)) /
                       ((mx * mx + my * my + c1) * (vx + vy + c2));
            }
    return acc / (static_cast<double>(nx) * ny * nz);
}

}  // namespace dudospect::oracles
