#pragma once

#include <array>
#include <vector>

#include "dudospect/tensors.hpp"

namespace dudospect {

// Channel-wise concatenation feeding the projection-domain networks:
// channel 0 is the prior reprojection, channel 1 the low-dose few-angle
// input. Prior-free variants keep the single input channel.
std::vector<ProjectionTensor> build_pcomb(const ProjectionTensor& x_tilde,
                                          const ProjectionTensor& p_ld_9a, bool with_prior);

// Adaptive data-consistency fusion of the auxiliary (denoised central
// columns) and primary (full 19-angle) predictions, all in the zero_fill
// layout:
//   S = r1*(aux*D*gamma) + r2*(primary*D*(1-gamma)) + r3*(primary*(1-D))
// with D the binary few-angle detector mask and * voxelwise.
ProjectionTensor adc_fuse(const ProjectionTensor& aux, const ProjectionTensor& primary,
                          const AngleMask& delta, const ProjectionTensor& gamma,
                          const std::array<double, 3>& recalibration);

// Hard data consistency: the central columns are replaced by the
// auxiliary prediction, outer columns pass through from the primary.
ProjectionTensor normal_dc_fuse(const ProjectionTensor& aux, const ProjectionTensor& primary,
                                const AngleMask& delta);

}  // namespace dudospect
