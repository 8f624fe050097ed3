#include "dudospect/harness/evaluate.hpp"

#include <algorithm>
#include <filesystem>

#include "dudospect/archive.hpp"
#include "dudospect/errors.hpp"
#include "dudospect/mlem.hpp"

namespace dudospect::harness {

namespace fs = std::filesystem;
using model::JointDudoModel;

namespace {

class ModelPredictor : public Predictor {
public:
    ModelPredictor(std::unique_ptr<JointDudoModel<float>> model, model::CheckpointMeta meta,
                   const DatasetManifest& manifest)
        : model_(std::move(model)),
          meta_(std::move(meta)),
          fp_op_(make_system_operator(manifest.geometry)) {}

    std::string label() const override { return to_string(meta_.variant.kind); }

    ProjectionTensor predict_projection(const DatasetCase& c) override {
        const auto trace = run(c);
        ProjectionTensor out = trace.output;
        for (auto& v : out.data) v *= meta_.normalization_scale;
        out.geometry_id = fp_op_.geometry.id();
        return out;
    }

    std::optional<VolumeTensor> predict_volume(const DatasetCase& c) override {
        if (meta_.variant.kind != model::VariantKind::attnunet_img) return std::nullopt;
        const auto trace = run(c);
        VolumeTensor out = trace.image_pred;
        out.grid = fp_op_.geometry.image_grid;
        for (auto& v : out.data) v *= meta_.normalization_scale;
        return out;
    }

private:
    model::ForwardTrace run(const DatasetCase& c) {
        const PreparedCase pc = prepare_case(c, meta_.normalization_scale);
        nn::Graph<float> g(&model_->params());
        const auto tv = model_->forward(g, pc.inputs, &fp_op_);
        return model_->extract_trace(g, tv);
    }

    std::unique_ptr<JointDudoModel<float>> model_;
    model::CheckpointMeta meta_;
    SystemOperator fp_op_;
};

void push_projection_metrics(MetricReport& r, const std::string& id, const ProjectionTensor& pred,
                             const ProjectionTensor& ref) {
    r.case_ids.push_back(id);
    r.nmse_values.push_back(nmse(pred, ref));
    r.nmae_values.push_back(nmae(pred, ref));
    r.ssim_values.push_back(ssim_projection(pred, ref));
    r.psnr_values.push_back(psnr(pred, ref));
}

void push_volume_metrics(MetricReport& r, const std::string& id, const VolumeTensor& pred,
                         const VolumeTensor& ref) {
    r.case_ids.push_back(id);
    r.nmse_values.push_back(nmse(pred, ref));
    r.nmae_values.push_back(nmae(pred, ref));
    r.ssim_values.push_back(ssim_volume(pred, ref));
    r.psnr_values.push_back(psnr(pred, ref));
}

}  // namespace

std::unique_ptr<Predictor> make_model_predictor(const std::string& checkpoint_base,
                                                const DatasetManifest& manifest) {
    auto [model, meta] = model::load_checkpoint(checkpoint_base, manifest.geometry);
    return std::make_unique<ModelPredictor>(std::move(model), meta, manifest);
}

EvaluationResult evaluate(Predictor& predictor, const DatasetManifest& manifest,
                          const std::string& split, const std::string& out_dir) {
    const auto& ids = manifest.split_ids(split);
    if (ids.empty()) throw ValidationError("split '" + split + "' is empty");
    fs::create_directories(out_dir);

    const SystemOperator op = make_system_operator(manifest.geometry);
    const AngleMask full = AngleMask::all_true(manifest.geometry.num_detectors());

    EvaluationResult result;
    result.projection.label = predictor.label() + " projections";
    result.image.label = predictor.label() + " images";
    result.baseline_projection.label = "baseline_ld9a projections";
    result.baseline_image.label = "baseline_ld9a images";

    bool sample_saved = false;
    for (const auto& id : ids) {
        const DatasetCase c = load_case(manifest, id);
        const ProjectionTensor pred_proj = predictor.predict_projection(c);
        push_projection_metrics(result.projection, id, pred_proj, c.p_fd_19a);
        push_projection_metrics(result.baseline_projection, id, c.p_ld_9a, c.p_fd_19a);

        VolumeTensor pred_vol;
        if (auto direct = predictor.predict_volume(c)) {
            pred_vol = std::move(*direct);
        } else {
            // network outputs are unconstrained; MLEM needs counts
            ProjectionTensor counts = pred_proj;
            for (auto& v : counts.data) v = std::max(0.0, v);
            MlemSettings settings{manifest.mlem_iterations, full, 1e-8};
            pred_vol = mlem(op, counts, settings);
        }
        push_volume_metrics(result.image, id, pred_vol, c.i_fd_19a);
        push_volume_metrics(result.baseline_image, id, c.i_ld_9a, c.i_fd_19a);

        if (!sample_saved) {
            TensorArchive ar;
            auto put_proj = [&ar](const std::string& name, const ProjectionTensor& p) {
                ar.put_f32(name,
                           {static_cast<uint64_t>(p.bins_u), static_cast<uint64_t>(p.bins_v),
                            static_cast<uint64_t>(p.n_angles)},
                           std::vector<float>(p.data.begin(), p.data.end()));
            };
            auto put_vol = [&ar](const std::string& name, const VolumeTensor& v) {
                ar.put_f32(name,
                           {static_cast<uint64_t>(v.grid.nx), static_cast<uint64_t>(v.grid.ny),
                            static_cast<uint64_t>(v.grid.nz)},
                           std::vector<float>(v.data.begin(), v.data.end()));
            };
            put_proj("pred_projection", pred_proj);
            put_proj("target_projection", c.p_fd_19a);
            put_proj("input_projection", c.p_ld_9a);
            put_vol("pred_volume", pred_vol);
            put_vol("target_volume", c.i_fd_19a);
            put_vol("input_volume", c.i_ld_9a);
            ar.save((fs::path(out_dir) / "eval_samples.ntar").string());
            sample_saved = true;
        }
    }

    result.projection.save((fs::path(out_dir) / "metrics_projection.csv").string(),
                           (fs::path(out_dir) / "metrics_projection.json").string());
    result.image.save((fs::path(out_dir) / "metrics_image.csv").string(),
                      (fs::path(out_dir) / "metrics_image.json").string());
    result.baseline_projection.save((fs::path(out_dir) / "baseline_projection.csv").string(),
                                    (fs::path(out_dir) / "baseline_projection.json").string());
    result.baseline_image.save((fs::path(out_dir) / "baseline_image.csv").string(),
                               (fs::path(out_dir) / "baseline_image.json").string());
    return result;
}

EvaluationResult evaluate_checkpoint(const std::string& checkpoint_base,
                                     const DatasetManifest& manifest, const std::string& split,
                                     const std::string& out_dir) {
    auto predictor = make_model_predictor(checkpoint_base, manifest);
    return evaluate(*predictor, manifest, split, out_dir);
}

}  // namespace dudospect::harness
