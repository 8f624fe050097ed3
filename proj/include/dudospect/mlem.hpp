#pragma once

#include "dudospect/projector.hpp"

namespace dudospect {

struct MlemSettings {
    int iterations = 30;
    AngleMask mask;  // detectors participating in the update
    double sensitivity_floor = 1e-8;  // relative to max sensitivity
};

struct MlemDiagnostics {
    std::vector<double> log_likelihood;  // per iteration, Poisson, y! term dropped
    int floored_voxels = 0;
};

// Standard multiplicative MLEM restricted to masked-in detectors:
//   x <- (x / sens) * F^T(mask * (y / F x))
// Uniform positive initialization scaled to sum(y)/sum(F(ones)); voxels
// with sensitivity below floor*max are excluded (forced to zero).
VolumeTensor mlem(const SystemOperator& op, const ProjectionTensor& y, const MlemSettings& settings,
                  MlemDiagnostics* diagnostics = nullptr);

// Poisson log-likelihood of counts y under mean lambda (y! term dropped),
// restricted to masked-in detectors.
double poisson_log_likelihood(const ProjectionTensor& y, const ProjectionTensor& lambda,
                              const AngleMask& mask);

}  // namespace dudospect
