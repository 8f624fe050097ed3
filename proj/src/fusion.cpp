#include "dudospect/model/fusion.hpp"

#include "dudospect/errors.hpp"

namespace dudospect {

std::vector<ProjectionTensor> build_pcomb(const ProjectionTensor& x_tilde,
                                          const ProjectionTensor& p_ld_9a, bool with_prior) {
    if (!with_prior) return {p_ld_9a};
    if (!x_tilde.same_shape(p_ld_9a)) throw ShapeError("build_pcomb: channel shapes differ");
    return {x_tilde, p_ld_9a};
}

ProjectionTensor adc_fuse(const ProjectionTensor& aux, const ProjectionTensor& primary,
                          const AngleMask& delta, const ProjectionTensor& gamma,
                          const std::array<double, 3>& recalibration) {
    if (!aux.same_shape(primary) || !aux.same_shape(gamma))
        throw ShapeError("adc_fuse: projection shapes differ");
    if (delta.size() != aux.n_angles) throw ShapeError("adc_fuse: mask length mismatch");
    ProjectionTensor out = ProjectionTensor::zeros_like(primary);
    const auto [r1, r2, r3] = recalibration;
    for (int iu = 0; iu < aux.bins_u; ++iu)
        for (int iv = 0; iv < aux.bins_v; ++iv)
            for (int a = 0; a < aux.n_angles; ++a) {
                const double d = delta.at(a) ? 1.0 : 0.0;
                const double g = gamma.at(iu, iv, a);
                out.at(iu, iv, a) = r1 * (aux.at(iu, iv, a) * d * g) +
                                    r2 * (primary.at(iu, iv, a) * d * (1.0 - g)) +
                                    r3 * (primary.at(iu, iv, a) * (1.0 - d));
            }
    return out;
}

ProjectionTensor normal_dc_fuse(const ProjectionTensor& aux, const ProjectionTensor& primary,
                                const AngleMask& delta) {
    if (!aux.same_shape(primary)) throw ShapeError("normal_dc_fuse: projection shapes differ");
    if (delta.size() != aux.n_angles) throw ShapeError("normal_dc_fuse: mask length mismatch");
    ProjectionTensor out = ProjectionTensor::zeros_like(primary);
    for (int iu = 0; iu < aux.bins_u; ++iu)
        for (int iv = 0; iv < aux.bins_v; ++iv)
            for (int a = 0; a < aux.n_angles; ++a)
                out.at(iu, iv, a) = delta.at(a) ? aux.at(iu, iv, a) : primary.at(iu, iv, a);
    return out;
}

}  // namespace dudospect
