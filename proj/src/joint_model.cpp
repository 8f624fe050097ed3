#include "dudospect/model/joint_model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dudospect/errors.hpp"

namespace dudospect::model {

using nlohmann::json;

std::string to_string(VariantKind kind) {
    switch (kind) {
        case VariantKind::joint_dudo: return "joint_dudo";
        case VariantKind::joint_dudo_no_adc: return "joint_dudo_no_adc";
        case VariantKind::joint_dudo_no_prior: return "joint_dudo_no_prior";
        case VariantKind::unet_proj: return "unet_proj";
        case VariantKind::attnunet_proj: return "attnunet_proj";
        case VariantKind::attnunet_img: return "attnunet_img";
    }
    throw ConfigError("unknown model variant");
}

VariantKind variant_from_string(const std::string& s) {
    if (s == "joint_dudo") return VariantKind::joint_dudo;
    if (s == "joint_dudo_no_adc") return VariantKind::joint_dudo_no_adc;
    if (s == "joint_dudo_no_prior") return VariantKind::joint_dudo_no_prior;
    if (s == "unet_proj") return VariantKind::unet_proj;
    if (s == "attnunet_proj") return VariantKind::attnunet_proj;
    if (s == "attnunet_img") return VariantKind::attnunet_img;
    throw ConfigError("unknown model variant '" + s + "'");
}

namespace {

double masked_l1_mean(const ProjectionTensor& x, const ProjectionTensor& t, const AngleMask& delta) {
    double acc = 0.0;
    int64_t n = 0;
    for (int iu = 0; iu < x.bins_u; ++iu)
        for (int iv = 0; iv < x.bins_v; ++iv)
            for (int a = 0; a < x.n_angles; ++a) {
                if (!delta.at(a)) continue;
                acc += std::abs(x.at(iu, iv, a) - t.at(iu, iv, a));
                ++n;
            }
    return n > 0 ? acc / static_cast<double>(n) : 0.0;
}

double l1_mean_all(const std::vector<double>& a, const std::vector<double>& b) {
    double acc = 0.0;
    for (size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
    return a.empty() ? 0.0 : acc / static_cast<double>(a.size());
}

}  // namespace

LossBreakdown compute_losses(const ForwardTrace& trace, const CaseTargets& targets,
                             const AngleMask& delta, double w_image, double w_proj) {
    LossBreakdown out;
    if (trace.has_image_pred) out.l_image = l1_mean_all(trace.image_pred.data, targets.i_fd_19a.data);
    for (const auto& aux : trace.aux)
        out.aux_terms.push_back(masked_l1_mean(aux, targets.p_fd_9a, delta));
    for (const auto& fused : trace.fused)
        out.fused_terms.push_back(l1_mean_all(fused.data, targets.p_fd_19a.data));
    if (!trace.fused.empty()) {
        for (size_t i = 0; i < trace.fused.size(); ++i)
            out.l_projection += out.aux_terms[i] + out.fused_terms[i];
    } else if (!trace.primary.empty()) {
        out.l_projection = l1_mean_all(trace.primary.back().data, targets.p_fd_19a.data);
    }
    out.l_total = w_image * out.l_image + w_proj * out.l_projection;
    for (double v : {out.l_image, out.l_projection, out.l_total})
        if (!std::isfinite(v)) throw NumericalError("loss breakdown contains a non-finite term");
    return out;
}

template <class T>
JointDudoModel<T>::JointDudoModel(ModelVariant variant, const ScannerGeometry& geometry,
                                  uint64_t init_seed)
    : variant_(variant), init_seed_(init_seed) {
    if (variant_.iterations < 1) throw ConfigError("model iterations must be >= 1");
    if (geometry.detectors.empty()) throw ConfigError("model needs a populated geometry");
    bins_u_ = geometry.detectors[0].bins_u;
    bins_v_ = geometry.detectors[0].bins_v;
    n_angles_ = geometry.num_detectors();
    padded_angles_ = ((n_angles_ + 3) / 4) * 4;
    nx_ = geometry.image_grid.nx;
    ny_ = geometry.image_grid.ny;
    nz_ = geometry.image_grid.nz;
    delta_ = central_column_mask(geometry);

    Rng rng(derive_seed(init_seed, "model-init"));
    const int64_t w = variant_.base_width;
    const bool attention = variant_.kind != VariantKind::unet_proj;

    if (variant_iterates(variant_.kind)) {
        const int comb_channels = variant_has_prior(variant_.kind) ? 2 : 1;
        if (variant_has_prior(variant_.kind))
            imgnet_.emplace(store_, "imgnet", variant_.imgnet_width, rng);
        for (int i = 1; i <= variant_.iterations; ++i) {
            const std::string tag = std::to_string(i);
            const int dn_in = i == 1 ? comb_channels : 2;
            dn_nets_.emplace_back(store_, "dn" + tag, dn_in, w, attention, rng);
            const int joint_in = comb_channels + (i - 1);
            joint_nets_.emplace_back(store_, "joint" + tag, joint_in, w, attention, rng);
            if (variant_has_adc(variant_.kind)) {
                mask_nets_.emplace_back(store_, "adc" + tag + ".mask", variant_.adc_growth, rng);
                recal_nets_.emplace_back(store_, "adc" + tag + ".recal", rng);
            }
        }
    } else if (variant_.kind == VariantKind::attnunet_img) {
        baseline_net_.emplace(store_, "imgunet", 1, w, true, rng);
    } else {
        baseline_net_.emplace(store_, "projunet", 1, w, attention, rng);
    }

    // constant masks in padded angle layout (pad slices are zero in both,
    // so fused outputs vanish there)
    delta_padded_ = nn::TensorT<T>::zeros({1, bins_u_, bins_v_, padded_angles_});
    delta_comp_padded_ = nn::TensorT<T>::zeros({1, bins_u_, bins_v_, padded_angles_});
    delta_weights_ = nn::TensorT<T>::zeros({1, bins_u_, bins_v_, n_angles_});
    for (int iu = 0; iu < bins_u_; ++iu)
        for (int iv = 0; iv < bins_v_; ++iv) {
            for (int a = 0; a < n_angles_; ++a) {
                const size_t padded_idx =
                    (static_cast<size_t>(iu) * bins_v_ + iv) * padded_angles_ + a;
                const size_t idx = (static_cast<size_t>(iu) * bins_v_ + iv) * n_angles_ + a;
                if (delta_.at(a)) {
                    delta_padded_.data[padded_idx] = T(1);
                    delta_weights_.data[idx] = T(1);
                } else {
                    delta_comp_padded_.data[padded_idx] = T(1);
                }
            }
        }
}

template <class T>
int JointDudoModel<T>::joint_net_input_channels(int i) const {
    if (!variant_iterates(variant_.kind)) throw ConfigError("variant has no joint nets");
    const int comb_channels = variant_has_prior(variant_.kind) ? 2 : 1;
    return comb_channels + (i - 1);
}

template <class T>
ProjectionTensor JointDudoModel<T>::to_projection(const nn::TensorT<T>& t) const {
    ProjectionTensor p = ProjectionTensor::zeros(static_cast<int>(t.dim(1)),
                                                 static_cast<int>(t.dim(2)),
                                                 static_cast<int>(t.dim(3)));
    for (size_t i = 0; i < p.data.size(); ++i) p.data[i] = static_cast<double>(t.data[i]);
    return p;
}

template <class T>
VolumeTensor JointDudoModel<T>::to_volume(const nn::TensorT<T>& t) const {
    GridSpec grid;
    grid.nx = static_cast<int>(t.dim(1));
    grid.ny = static_cast<int>(t.dim(2));
    grid.nz = static_cast<int>(t.dim(3));
    grid.voxel_size_mm = 1.0;
    VolumeTensor v = VolumeTensor::zeros(grid);
    for (size_t i = 0; i < v.data.size(); ++i) v.data[i] = static_cast<double>(t.data[i]);
    return v;
}

template <class T>
TraceVars<T> JointDudoModel<T>::forward(Graph<T>& g, const CaseInputs<T>& inputs,
                                        const SystemOperator* fp_op,
                                        int iterations_override) const {
    TraceVars<T> tv;
    if (inputs.p_ld_9a.shape != std::vector<int64_t>{1, bins_u_, bins_v_, n_angles_})
        throw ShapeError("forward: projection input shape mismatch");

    if (variant_.kind == VariantKind::attnunet_img) {
        Var vol_in = g.input(inputs.i_ld_9a);
        Var pred = (*baseline_net_)(g, vol_in);
        tv.image_pred = pred;
        if (fp_op) tv.output = g.project_fp(pred, fp_op);
        return tv;
    }

    Var p_ld = g.input(inputs.p_ld_9a);
    Var p_ld_pad = g.pad_last(p_ld, padded_angles_);

    if (!variant_iterates(variant_.kind)) {
        Var out_pad = (*baseline_net_)(g, p_ld_pad);
        Var out = g.crop_last(out_pad, n_angles_);
        tv.primary.push_back(out);
        tv.output = out;
        return tv;
    }

    const int n_iters = iterations_override > 0 ? iterations_override : variant_.iterations;
    if (n_iters > variant_.iterations)
        throw ConfigError("iterations override exceeds the constructed iteration count");

    Var comb = -1;
    if (variant_has_prior(variant_.kind)) {
        if (!fp_op) throw ConfigError("prior-based variant needs a forward projector");
        Var vol_in = g.input(inputs.i_ld_9a);
        Var img_pred = (*imgnet_)(g, vol_in);
        Var x_tilde = g.project_fp(img_pred, fp_op);
        Var x_tilde_pad = g.pad_last(x_tilde, padded_angles_);
        comb = g.concat({x_tilde_pad, p_ld_pad});
        tv.image_pred = img_pred;
        tv.x_tilde = x_tilde;
    } else {
        comb = p_ld_pad;
    }

    Var delta_pad = g.input(delta_padded_);
    Var delta_comp_pad = g.input(delta_comp_padded_);

    std::vector<Var> aux_padded, fused_padded;
    for (int i = 1; i <= n_iters; ++i) {
        const auto& dn = dn_nets_[static_cast<size_t>(i - 1)];
        const auto& joint = joint_nets_[static_cast<size_t>(i - 1)];

        Var dn_in = i == 1 ? comb : g.concat({fused_padded[static_cast<size_t>(i - 2)],
                                              aux_padded[static_cast<size_t>(i - 2)]});
        Var aux_pad = dn(g, dn_in);

        std::vector<Var> joint_parts{comb};
        for (int m = 0; m < i - 1; ++m) joint_parts.push_back(fused_padded[static_cast<size_t>(m)]);
        Var joint_in = i == 1 ? comb : g.concat(joint_parts);
        Var prim_pad = joint(g, joint_in);

        Var fused_pad = -1;
        if (variant_has_adc(variant_.kind)) {
            const auto& mask_net = mask_nets_[static_cast<size_t>(i - 1)];
            const auto& recal_net = recal_nets_[static_cast<size_t>(i - 1)];
            Var gamma = mask_net(g, aux_pad, prim_pad);
            Var a_term = g.mul_spatial(g.mul_spatial(aux_pad, delta_pad), gamma);
            Var b_term = g.mul_spatial(g.mul_spatial(prim_pad, delta_pad), g.affine(gamma, T(-1), T(1)));
            Var c_term = g.mul_spatial(prim_pad, delta_comp_pad);
            Var stacked = g.concat({a_term, b_term, c_term});
            Var r = recal_net(g, stacked);
            fused_pad = g.sum_channels(g.mul_channel(stacked, r));
            tv.gamma.push_back(g.crop_last(gamma, n_angles_));
            tv.recal.push_back(r);
        } else {
            fused_pad = g.add(g.mul_spatial(aux_pad, delta_pad),
                              g.mul_spatial(prim_pad, delta_comp_pad));
        }

        aux_padded.push_back(aux_pad);
        fused_padded.push_back(fused_pad);
        tv.aux.push_back(g.crop_last(aux_pad, n_angles_));
        tv.primary.push_back(g.crop_last(prim_pad, n_angles_));
        tv.fused.push_back(g.crop_last(fused_pad, n_angles_));
    }
    tv.output = tv.fused.back();
    return tv;
}

template <class T>
LossVars<T> JointDudoModel<T>::losses(Graph<T>& g, const TraceVars<T>& tv,
                                      const CaseTargets& targets, T w_image, T w_proj) const {
    LossVars<T> lv;
    auto to_tensor_proj = [&](const ProjectionTensor& p) {
        nn::TensorT<T> t = nn::TensorT<T>::zeros({1, p.bins_u, p.bins_v, p.n_angles});
        for (size_t i = 0; i < p.data.size(); ++i) t.data[i] = static_cast<T>(p.data[i]);
        return t;
    };
    auto to_tensor_vol = [&](const VolumeTensor& v) {
        nn::TensorT<T> t = nn::TensorT<T>::zeros({1, v.grid.nx, v.grid.ny, v.grid.nz});
        for (size_t i = 0; i < v.data.size(); ++i) t.data[i] = static_cast<T>(v.data[i]);
        return t;
    };

    if (tv.image_pred >= 0)
        lv.image = g.l1_mean(tv.image_pred, to_tensor_vol(targets.i_fd_19a));

    if (!tv.fused.empty()) {
        const auto p9 = to_tensor_proj(targets.p_fd_9a);
        const auto p19 = to_tensor_proj(targets.p_fd_19a);
        std::vector<Var> terms;
        std::vector<T> ones;
        for (size_t i = 0; i < tv.fused.size(); ++i) {
            Var aux_term = g.l1_mean(tv.aux[i], p9, delta_weights_);
            Var fused_term = g.l1_mean(tv.fused[i], p19);
            lv.aux_terms.push_back(aux_term);
            lv.fused_terms.push_back(fused_term);
            terms.push_back(aux_term);
            terms.push_back(fused_term);
            ones.push_back(T(1));
            ones.push_back(T(1));
        }
        lv.projection = g.weighted_sum(terms, ones);
    } else if (!tv.primary.empty()) {
        lv.projection = g.l1_mean(tv.primary.back(), to_tensor_proj(targets.p_fd_19a));
    }

    std::vector<Var> parts;
    std::vector<T> weights;
    if (lv.image >= 0) {
        parts.push_back(lv.image);
        weights.push_back(w_image);
    }
    if (lv.projection >= 0) {
        parts.push_back(lv.projection);
        weights.push_back(w_proj);
    }
    if (parts.empty()) throw ConfigError("variant produced no loss terms");
    lv.total = g.weighted_sum(parts, weights);
    return lv;
}

template <class T>
ForwardTrace JointDudoModel<T>::extract_trace(const Graph<T>& g, const TraceVars<T>& tv) const {
    ForwardTrace tr;
    if (tv.x_tilde >= 0) {
        tr.x_tilde = to_projection(g.value(tv.x_tilde));
        tr.has_prior = true;
    }
    for (Var v : tv.aux) tr.aux.push_back(to_projection(g.value(v)));
    for (Var v : tv.primary) tr.primary.push_back(to_projection(g.value(v)));
    for (Var v : tv.fused) tr.fused.push_back(to_projection(g.value(v)));
    for (Var v : tv.gamma) tr.gamma.push_back(to_projection(g.value(v)));
    for (Var v : tv.recal) {
        const auto& r = g.value(v).data;
        tr.recalibration.push_back({static_cast<double>(r[0]), static_cast<double>(r[1]),
                                    static_cast<double>(r[2])});
    }
    if (tv.image_pred >= 0) {
        tr.image_pred = to_volume(g.value(tv.image_pred));
        tr.has_image_pred = true;
    }
    if (tv.output >= 0) tr.output = to_projection(g.value(tv.output));
    return tr;
}

template <class T>
TensorArchive JointDudoModel<T>::to_archive() const {
    TensorArchive ar;
    for (const auto& p : store_.all()) {
        std::vector<uint64_t> shape(p.value.shape.begin(), p.value.shape.end());
        if constexpr (std::is_same_v<T, float>) {
            ar.put_f32(p.name, std::move(shape), p.value.data);
        } else {
            ar.put_f64(p.name, std::move(shape), p.value.data);
        }
    }
    return ar;
}

template <class T>
void JointDudoModel<T>::load_from_archive(const TensorArchive& ar) {
    for (auto& p : store_.all()) {
        const NamedTensor& t = ar.get(p.name);
        if (t.num_elems() != static_cast<uint64_t>(p.value.numel()))
            throw ShapeError("checkpoint parameter '" + p.name + "' has wrong size");
        const auto values = t.as_f64();
        for (size_t i = 0; i < values.size(); ++i) p.value.data[i] = static_cast<T>(values[i]);
    }
}

void save_checkpoint(const std::string& path_base, const JointDudoModel<float>& model,
                     const CheckpointMeta& meta) {
    model.to_archive().save(path_base + ".ntar");
    json j;
    j["format"] = "dudospect-checkpoint-v1";
    j["variant"] = to_string(meta.variant.kind);
    j["iterations"] = meta.variant.iterations;
    j["base_width"] = meta.variant.base_width;
    j["imgnet_width"] = meta.variant.imgnet_width;
    j["adc_growth"] = meta.variant.adc_growth;
    j["init_seed"] = meta.init_seed;
    j["geometry_id"] = meta.geometry_id;
    j["normalization_scale"] = meta.normalization_scale;
    std::ofstream out(path_base + ".json", std::ios::binary);
    if (!out) throw IoError("cannot write checkpoint descriptor '" + path_base + ".json'");
    out << j.dump(2) << "\n";
}

std::pair<std::unique_ptr<JointDudoModel<float>>, CheckpointMeta> load_checkpoint(
    const std::string& path_base, const ScannerGeometry& geometry) {
    std::ifstream in(path_base + ".json", std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint descriptor '" + path_base + ".json'");
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw IoError(std::string("checkpoint descriptor parse failure: ") + e.what());
    }
    CheckpointMeta meta;
    meta.variant.kind = variant_from_string(j.at("variant").get<std::string>());
    meta.variant.iterations = j.at("iterations").get<int>();
    meta.variant.base_width = j.at("base_width").get<int>();
    meta.variant.imgnet_width = j.at("imgnet_width").get<int>();
    meta.variant.adc_growth = j.at("adc_growth").get<int>();
    meta.init_seed = j.at("init_seed").get<uint64_t>();
    meta.geometry_id = j.at("geometry_id").get<std::string>();
    meta.normalization_scale = j.at("normalization_scale").get<double>();
    if (meta.geometry_id != geometry.id())
        throw ConfigError("checkpoint was trained on a different geometry");
    auto model = std::make_unique<JointDudoModel<float>>(meta.variant, geometry, meta.init_seed);
    model->load_from_archive(TensorArchive::load(path_base + ".ntar"));
    return {std::move(model), meta};
}

template class JointDudoModel<float>;
template class JointDudoModel<double>;

}  // namespace dudospect::model
