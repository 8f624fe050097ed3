#include "dudospect/tensors.hpp"

#include <cmath>

#include "dudospect/errors.hpp"

namespace dudospect {

double VolumeTensor::sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
}

bool VolumeTensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

double ProjectionTensor::sum() const {
    double s = 0.0;
    for (double v : data) s += v;
    return s;
}

double ProjectionTensor::angle_sum(int a) const {
    double s = 0.0;
    for (int iu = 0; iu < bins_u; ++iu)
        for (int iv = 0; iv < bins_v; ++iv) s += at(iu, iv, a);
    return s;
}

bool ProjectionTensor::all_finite() const {
    for (double v : data)
        if (!std::isfinite(v)) return false;
    return true;
}

ProjectionTensor apply_angle_mask(const ProjectionTensor& p, const AngleMask& mask, MaskMode mode) {
    if (mask.size() != p.n_angles)
        throw ShapeError("angle mask length does not match projection angle count");
    if (mode == MaskMode::zero_fill) {
        ProjectionTensor out = p;
        for (int a = 0; a < p.n_angles; ++a) {
            if (mask.at(a)) continue;
            for (int iu = 0; iu < p.bins_u; ++iu)
                for (int iv = 0; iv < p.bins_v; ++iv) out.at(iu, iv, a) = 0.0;
        }
        return out;
    }
    ProjectionTensor out = ProjectionTensor::zeros(p.bins_u, p.bins_v, mask.count(), p.geometry_id);
    int slot = 0;
    for (int a = 0; a < p.n_angles; ++a) {
        if (!mask.at(a)) continue;
        for (int iu = 0; iu < p.bins_u; ++iu)
            for (int iv = 0; iv < p.bins_v; ++iv) out.at(iu, iv, slot) = p.at(iu, iv, a);
        ++slot;
    }
    return out;
}

}  // namespace dudospect
