#include "dudospect/mlem.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "dudospect/errors.hpp"

namespace dudospect {

double poisson_log_likelihood(const ProjectionTensor& y, const ProjectionTensor& lambda,
                              const AngleMask& mask) {
    if (!y.same_shape(lambda)) throw ShapeError("log-likelihood: shape mismatch");
    if (mask.size() != y.n_angles) throw ShapeError("log-likelihood: mask length mismatch");
    double ll = 0.0;
    for (int iu = 0; iu < y.bins_u; ++iu)
        for (int iv = 0; iv < y.bins_v; ++iv)
            for (int a = 0; a < y.n_angles; ++a) {
                if (!mask.at(a)) continue;
                const double yi = y.at(iu, iv, a);
                const double li = lambda.at(iu, iv, a);
                if (li > 0.0)
                    ll += yi * std::log(li) - li;
                else if (yi > 0.0)
                    return -std::numeric_limits<double>::infinity();
            }
    return ll;
}

VolumeTensor mlem(const SystemOperator& op, const ProjectionTensor& y, const MlemSettings& settings,
                  MlemDiagnostics* diagnostics) {
    if (settings.iterations < 1) throw ConfigError("MLEM needs at least one iteration");
    AngleMask mask = settings.mask;
    if (mask.flags.empty()) mask = AngleMask::all_true(y.n_angles);
    if (mask.size() != y.n_angles) throw ShapeError("MLEM mask length mismatch");
    for (double v : y.data)
        if (v < 0.0) throw ValidationError("MLEM input counts must be nonnegative");

    const VolumeTensor sens = sensitivity_image(op, mask);
    const double sens_max = *std::max_element(sens.data.begin(), sens.data.end());
    if (sens_max <= 0.0) throw ConfigError("zero sensitivity everywhere; check mask/geometry");
    const double floor_abs = settings.sensitivity_floor * sens_max;

    std::vector<uint8_t> active(sens.data.size());
    int floored = 0;
    for (size_t i = 0; i < sens.data.size(); ++i) {
        active[i] = sens.data[i] > floor_abs ? 1 : 0;
        floored += active[i] ? 0 : 1;
    }
    if (diagnostics) diagnostics->floored_voxels = floored;

    // scale-matched uniform start: sum(y) / sum(F(ones))
    VolumeTensor ones = VolumeTensor::zeros(op.geometry.image_grid);
    std::fill(ones.data.begin(), ones.data.end(), 1.0);
    const ProjectionTensor f_ones = forward_project_masked(op, ones, mask);
    double y_sum = 0.0;
    for (int iu = 0; iu < y.bins_u; ++iu)
        for (int iv = 0; iv < y.bins_v; ++iv)
            for (int a = 0; a < y.n_angles; ++a)
                if (mask.at(a)) y_sum += y.at(iu, iv, a);
    const double f_ones_sum = f_ones.sum();
    const double init = f_ones_sum > 0.0 ? y_sum / f_ones_sum : 0.0;

    VolumeTensor x = VolumeTensor::zeros(op.geometry.image_grid);
    for (size_t i = 0; i < x.data.size(); ++i) x.data[i] = active[i] ? init : 0.0;
    if (y_sum == 0.0) {
        // zero data: the first multiplicative update annihilates everything
        std::fill(x.data.begin(), x.data.end(), 0.0);
        if (diagnostics) diagnostics->log_likelihood.assign(static_cast<size_t>(settings.iterations), 0.0);
        return x;
    }

    ProjectionTensor ratio = ProjectionTensor::zeros_like(y);
    for (int it = 0; it < settings.iterations; ++it) {
        const ProjectionTensor fx = forward_project_masked(op, x, mask);
        if (diagnostics) diagnostics->log_likelihood.push_back(poisson_log_likelihood(y, fx, mask));
        for (size_t i = 0; i < ratio.data.size(); ++i) {
            const double den = fx.data[i];
            ratio.data[i] = den > 0.0 ? y.data[i] / den : 0.0;
        }
        const VolumeTensor corr = back_project_masked(op, ratio, mask);
        for (size_t i = 0; i < x.data.size(); ++i) {
            if (!active[i]) continue;
            x.data[i] *= corr.data[i] / sens.data[i];
            if (!std::isfinite(x.data[i]))
                throw NumericalError("MLEM produced a non-finite voxel at iteration " +
                                     std::to_string(it + 1));
        }
    }
    return x;
}

}  // namespace dudospect
