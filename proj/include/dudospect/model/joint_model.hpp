#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dudospect/archive.hpp"
#include "dudospect/model/fusion.hpp"
#include "dudospect/model/networks.hpp"
#include "dudospect/projector.hpp"

namespace dudospect::model {

enum class VariantKind {
    joint_dudo,
    joint_dudo_no_adc,
    joint_dudo_no_prior,
    unet_proj,
    attnunet_proj,
    attnunet_img,
};

std::string to_string(VariantKind kind);
VariantKind variant_from_string(const std::string& s);

inline bool variant_iterates(VariantKind k) {
    return k == VariantKind::joint_dudo || k == VariantKind::joint_dudo_no_adc ||
           k == VariantKind::joint_dudo_no_prior;
}
inline bool variant_has_prior(VariantKind k) {
    return k == VariantKind::joint_dudo || k == VariantKind::joint_dudo_no_adc;
}
inline bool variant_has_adc(VariantKind k) {
    return k == VariantKind::joint_dudo || k == VariantKind::joint_dudo_no_prior;
}
inline bool variant_is_image_domain(VariantKind k) { return k == VariantKind::attnunet_img; }

struct ModelVariant {
    VariantKind kind = VariantKind::joint_dudo;
    int iterations = 4;
    int base_width = 16;
    int imgnet_width = 16;
    int adc_growth = 8;
};

// Normalized per-case model inputs / training targets.
struct CaseTargets {
    ProjectionTensor p_fd_19a;
    ProjectionTensor p_fd_9a;  // zero_fill layout
    VolumeTensor i_fd_19a;
};

// Everything the unrolled forward pass produces, in physical (19-angle,
// cropped) layout.
struct ForwardTrace {
    ProjectionTensor x_tilde;                       // prior reprojection
    std::vector<ProjectionTensor> aux;              // per iteration
    std::vector<ProjectionTensor> primary;          // per iteration
    std::vector<ProjectionTensor> fused;            // per iteration
    std::vector<ProjectionTensor> gamma;            // adaptive masks
    std::vector<std::array<double, 3>> recalibration;
    VolumeTensor image_pred;
    ProjectionTensor output;  // network output (fused.back() for joint variants)
    bool has_image_pred = false;
    bool has_prior = false;
};

struct LossBreakdown {
    double l_image = 0.0;
    double l_projection = 0.0;
    double l_total = 0.0;
    std::vector<double> aux_terms;
    std::vector<double> fused_terms;
};

// Mean-reduced L1 losses: aux terms are masked means over the central
// columns, fused/image terms plain means. l_total = w_i*l_image + w_p*l_proj.
LossBreakdown compute_losses(const ForwardTrace& trace, const CaseTargets& targets,
                             const AngleMask& delta, double w_image = 0.5, double w_proj = 0.5);

// Graph-facing handles produced by one forward build.
template <class T>
struct TraceVars {
    Var x_tilde = -1;
    std::vector<Var> aux, primary, fused;
    std::vector<Var> gamma, recal;
    Var image_pred = -1;
    Var output = -1;
};

template <class T>
struct LossVars {
    Var image = -1;       // -1 when the variant has no image branch
    Var projection = -1;  // -1 when the variant has no projection branch
    Var total = -1;
    std::vector<Var> aux_terms, fused_terms;
};

template <class T>
struct CaseInputs {
    nn::TensorT<T> p_ld_9a;  // [1, u, v, angles] zero_fill, normalized
    nn::TensorT<T> i_ld_9a;  // [1, nx, ny, nz], normalized
};

// The full trainable architecture for every variant. All parameters live
// in an owned ParamStore; ADC parameters carry the "adc." name prefix so
// the optimizer can address them as a separate group.
template <class T>
class JointDudoModel {
public:
    JointDudoModel(ModelVariant variant, const ScannerGeometry& geometry, uint64_t init_seed);

    TraceVars<T> forward(Graph<T>& g, const CaseInputs<T>& inputs, const SystemOperator* fp_op,
                         int iterations_override = -1) const;
    LossVars<T> losses(Graph<T>& g, const TraceVars<T>& trace, const CaseTargets& targets,
                       T w_image = T(0.5), T w_proj = T(0.5)) const;

    ForwardTrace extract_trace(const Graph<T>& g, const TraceVars<T>& tv) const;

    ParamStore<T>& params() { return store_; }
    const ParamStore<T>& params() const { return store_; }
    const ModelVariant& variant() const { return variant_; }
    uint64_t init_seed() const { return init_seed_; }
    int angles() const { return n_angles_; }
    int padded_angles() const { return padded_angles_; }
    // Input channel count of the primary net at iteration i (1-based).
    int joint_net_input_channels(int i) const;

    TensorArchive to_archive() const;
    void load_from_archive(const TensorArchive& ar);

private:
    ModelVariant variant_;
    uint64_t init_seed_ = 0;
    int bins_u_ = 0, bins_v_ = 0, n_angles_ = 0, padded_angles_ = 0;
    int nx_ = 0, ny_ = 0, nz_ = 0;
    AngleMask delta_;

    ParamStore<T> store_;
    std::optional<ResidualImageNet<T>> imgnet_;
    std::vector<AttentionUNet<T>> dn_nets_;
    std::vector<AttentionUNet<T>> joint_nets_;
    std::vector<AdaptiveMaskNet<T>> mask_nets_;
    std::vector<ChannelRecalibration<T>> recal_nets_;
    std::optional<AttentionUNet<T>> baseline_net_;

    nn::TensorT<T> delta_padded_;       // [1,u,v,P]: 1 on central real slices
    nn::TensorT<T> delta_comp_padded_;  // [1,u,v,P]: 1 on outer real slices
    nn::TensorT<T> delta_weights_;      // [1,u,v,A]: aux-loss mask

    ProjectionTensor to_projection(const nn::TensorT<T>& t) const;
    VolumeTensor to_volume(const nn::TensorT<T>& t) const;
};

// Checkpoint = named-parameter archive + JSON descriptor.
struct CheckpointMeta {
    ModelVariant variant;
    uint64_t init_seed = 0;
    std::string geometry_id;
    double normalization_scale = 1.0;
};

void save_checkpoint(const std::string& path_base, const JointDudoModel<float>& model,
                     const CheckpointMeta& meta);
std::pair<std::unique_ptr<JointDudoModel<float>>, CheckpointMeta> load_checkpoint(
    const std::string& path_base, const ScannerGeometry& geometry);

extern template class JointDudoModel<float>;
extern template class JointDudoModel<double>;

}  // namespace dudospect::model
