#pragma once

#include <optional>

#include "dudospect/geometry.hpp"
#include "dudospect/tensors.hpp"

namespace dudospect {

// Ray-driven pinhole projector. Rays run from each detector bin center
// through the (ideal point) pinhole; voxel values are sampled by trilinear
// interpolation at a fixed step of half a voxel, optionally attenuated by
// an exponential line integral through the attenuation volume.
//
// back_project is the exact transpose of the discretized forward model
// (same rays, same weights, scattered accumulation), so the adjoint
// identity <Fx, p> == <x, F^T p> holds to rounding error.
struct SystemOperator {
    ScannerGeometry geometry;
    std::optional<VolumeTensor> attenuation;  // linear attenuation per mm
    int sampling = 1;                         // sub-rays per bin axis (total sampling^2)
};

SystemOperator make_system_operator(ScannerGeometry geometry,
                                    std::optional<VolumeTensor> attenuation = std::nullopt,
                                    int sampling = 1);

ProjectionTensor forward_project(const SystemOperator& op, const VolumeTensor& x);
VolumeTensor back_project(const SystemOperator& op, const ProjectionTensor& p);

// Restricted variants: masked-out detectors are skipped entirely (their
// output stays zero / their input is ignored).
ProjectionTensor forward_project_masked(const SystemOperator& op, const VolumeTensor& x,
                                        const AngleMask& mask);
VolumeTensor back_project_masked(const SystemOperator& op, const ProjectionTensor& p,
                                 const AngleMask& mask);

// back_project of a projection that is 1 on masked-in detectors, 0 elsewhere.
VolumeTensor sensitivity_image(const SystemOperator& op, const AngleMask& mask);

}  // namespace dudospect
