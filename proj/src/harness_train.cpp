#include "dudospect/harness/train.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dudospect/errors.hpp"
#include "dudospect/metrics.hpp"
#include "dudospect/rng.hpp"

namespace dudospect::harness {

namespace fs = std::filesystem;
using nlohmann::json;
using model::CaseInputs;
using model::CaseTargets;
using model::JointDudoModel;

namespace {

json epochs_to_json(const TrainingLog& log) {
    json epochs = json::array();
    for (const auto& e : log.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"lr_main", e.lr_main},
                          {"lr_adc", e.lr_adc},
                          {"loss_image", e.loss_image},
                          {"loss_projection", e.loss_projection},
                          {"loss_total", e.loss_total},
                          {"val_nmse", e.val_nmse}});
    return epochs;
}

// one Adam step over both learning-rate groups
void adam_step(nn::ParamStore<float>& store, float lr_main, float lr_adc, int64_t t) {
    constexpr float beta1 = 0.9f, beta2 = 0.999f, eps = 1e-8f;
    const float bc1 = 1.0f - std::pow(beta1, static_cast<float>(t));
    const float bc2 = 1.0f - std::pow(beta2, static_cast<float>(t));
    for (auto& p : store.all()) {
        const float lr = p.name.rfind("adc", 0) == 0 ? lr_adc : lr_main;
        for (size_t i = 0; i < p.value.data.size(); ++i) {
            const float g = p.grad.data[i];
            p.adam_m.data[i] = beta1 * p.adam_m.data[i] + (1.0f - beta1) * g;
            p.adam_v.data[i] = beta2 * p.adam_v.data[i] + (1.0f - beta2) * g * g;
            const float mhat = p.adam_m.data[i] / bc1;
            const float vhat = p.adam_v.data[i] / bc2;
            p.value.data[i] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

nn::TensorT<float> proj_to_tensor(const ProjectionTensor& p, double scale) {
    nn::TensorT<float> t = nn::TensorT<float>::zeros({1, p.bins_u, p.bins_v, p.n_angles});
    for (size_t i = 0; i < p.data.size(); ++i) t.data[i] = static_cast<float>(p.data[i] / scale);
    return t;
}

nn::TensorT<float> vol_to_tensor(const VolumeTensor& v, double scale) {
    nn::TensorT<float> t = nn::TensorT<float>::zeros({1, v.grid.nx, v.grid.ny, v.grid.nz});
    for (size_t i = 0; i < v.data.size(); ++i) t.data[i] = static_cast<float>(v.data[i] / scale);
    return t;
}

ProjectionTensor scale_projection(const ProjectionTensor& p, double factor) {
    ProjectionTensor out = p;
    for (auto& v : out.data) v *= factor;
    return out;
}

VolumeTensor scale_volume(const VolumeTensor& v, double factor) {
    VolumeTensor out = v;
    for (auto& x : out.data) x *= factor;
    return out;
}

}  // namespace

PreparedCase prepare_case(const DatasetCase& c, double per_bin_scale) {
    PreparedCase pc;
    pc.id = c.case_id;
    pc.inputs.p_ld_9a = proj_to_tensor(c.p_ld_9a, per_bin_scale);
    pc.inputs.i_ld_9a = vol_to_tensor(c.i_ld_9a, per_bin_scale);
    pc.targets.p_fd_19a = scale_projection(c.p_fd_19a, 1.0 / per_bin_scale);
    pc.targets.p_fd_9a = scale_projection(c.p_fd_9a, 1.0 / per_bin_scale);
    pc.targets.i_fd_19a = scale_volume(c.i_fd_19a, 1.0 / per_bin_scale);
    pc.p_ld_raw = c.p_ld_9a;
    pc.i_ld_raw = c.i_ld_9a;
    pc.p_fd_raw = c.p_fd_19a;
    pc.i_fd_raw = c.i_fd_19a;
    return pc;
}

std::string TrainingLog::deterministic_json() const {
    json j;
    j["epochs"] = epochs_to_json(*this);
    j["best_epoch"] = best_epoch;
    j["best_val_nmse"] = best_val_nmse;
    return j.dump(2);
}

std::string TrainingLog::to_json_string() const {
    json j;
    j["format"] = "dudospect-trainlog-v1";
    j["epochs"] = epochs_to_json(*this);
    j["best_epoch"] = best_epoch;
    j["best_val_nmse"] = best_val_nmse;
    j["wall_time_sec"] = wall_time_sec;
    return j.dump(2);
}

void TrainingLog::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write training log '" + path + "'");
    out << to_json_string() << "\n";
}

TrainingLog TrainingLog::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open training log '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw IoError(std::string("training log parse failure: ") + e.what());
    }
    TrainingLog log;
    for (const auto& ej : j.at("epochs")) {
        EpochLog e;
        e.epoch = ej.at("epoch").get<int>();
        e.lr_main = ej.at("lr_main").get<double>();
        e.lr_adc = ej.at("lr_adc").get<double>();
        e.loss_image = ej.at("loss_image").get<double>();
        e.loss_projection = ej.at("loss_projection").get<double>();
        e.loss_total = ej.at("loss_total").get<double>();
        e.val_nmse = ej.at("val_nmse").get<double>();
        log.epochs.push_back(e);
    }
    log.best_epoch = j.at("best_epoch").get<int>();
    log.best_val_nmse = j.at("best_val_nmse").get<double>();
    log.wall_time_sec = j.value("wall_time_sec", std::vector<double>{});
    return log;
}

TrainResult train(const ExperimentConfig& config, const DatasetManifest& manifest,
                  const std::string& run_dir) {
    config.validate();
    if (manifest.geometry.detectors.empty()) throw ConfigError("manifest has no geometry");
    const ScannerGeometry& geometry = manifest.geometry;
    {
        const ScannerGeometry expected = build_geometry(config.geometry);
        if (expected.id() != geometry.id())
            throw ConfigError("dataset geometry does not match the experiment config");
    }

    fs::create_directories(run_dir);
    config.save((fs::path(run_dir) / "config.json").string());

    const SystemOperator fp_op = make_system_operator(geometry);
    const double scale = manifest.norm_per_bin_scale;

    auto load_split = [&](const std::string& split) {
        std::vector<PreparedCase> out;
        for (const auto& id : manifest.split_ids(split))
            out.push_back(prepare_case(load_case(manifest, id), scale));
        return out;
    };
    const std::vector<PreparedCase> train_cases = load_split("train");
    const std::vector<PreparedCase> val_cases = load_split("val");
    if (train_cases.empty() || val_cases.empty())
        throw ConfigError("training needs non-empty train and val splits");

    JointDudoModel<float> model(config.variant, geometry, config.master_seed);
    auto& store = model.params();

    const int n_epochs = config.effective_epochs();
    const auto wI = static_cast<float>(config.w_image);
    const auto wP = static_cast<float>(config.w_proj);

    TrainingLog log;
    std::vector<nn::TensorT<float>> best_params;
    int64_t adam_t = 0;

    for (int epoch = 0; epoch < n_epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        const double lr_main = config.lr_main * std::pow(config.decay_per_epoch, epoch);
        const double lr_adc = config.lr_adc * std::pow(config.decay_per_epoch, epoch);

        std::vector<size_t> order(train_cases.size());
        for (size_t i = 0; i < order.size(); ++i) order[i] = i;
        Rng shuffle_rng(derive_seed(config.master_seed, "shuffle", static_cast<uint64_t>(epoch)));
        shuffle_rng.shuffle(order);

        double sum_l_img = 0.0, sum_l_proj = 0.0, sum_l_total = 0.0;
        int64_t n_samples = 0;
        for (size_t start = 0; start < order.size(); start += static_cast<size_t>(config.batch_size)) {
            const size_t stop = std::min(order.size(), start + static_cast<size_t>(config.batch_size));
            const auto batch_n = static_cast<float>(stop - start);
            store.zero_grads();
            for (size_t k = start; k < stop; ++k) {
                const PreparedCase& pc = train_cases[order[k]];
                nn::Graph<float> g(&store);
                const auto tv = model.forward(g, pc.inputs, &fp_op);
                const auto lv = model.losses(g, tv, pc.targets, wI, wP);
                const double l_total = g.value(lv.total).item();
                if (!std::isfinite(l_total))
                    throw NumericalError("training diverged (non-finite loss) at epoch " +
                                         std::to_string(epoch) + ", step " +
                                         std::to_string(start / config.batch_size));
                sum_l_total += l_total;
                sum_l_img += lv.image >= 0 ? g.value(lv.image).item() : 0.0;
                sum_l_proj += lv.projection >= 0 ? g.value(lv.projection).item() : 0.0;
                ++n_samples;
                g.backward(lv.total, 1.0f / batch_n);
                g.harvest_param_grads();
            }
            ++adam_t;
            adam_step(store, static_cast<float>(lr_main), static_cast<float>(lr_adc), adam_t);
        }

        double val_nmse_sum = 0.0;
        for (const auto& pc : val_cases) {
            nn::Graph<float> g(&store);
            const auto tv = model.forward(g, pc.inputs, &fp_op);
            const auto& out = g.value(tv.output);
            std::vector<double> pred(out.data.begin(), out.data.end());
            val_nmse_sum += nmse(pred, pc.targets.p_fd_19a.data);
        }
        const double val_nmse = val_nmse_sum / static_cast<double>(val_cases.size());

        EpochLog e;
        e.epoch = epoch;
        e.lr_main = lr_main;
        e.lr_adc = lr_adc;
        e.loss_image = sum_l_img / static_cast<double>(n_samples);
        e.loss_projection = sum_l_proj / static_cast<double>(n_samples);
        e.loss_total = sum_l_total / static_cast<double>(n_samples);
        e.val_nmse = val_nmse;
        log.epochs.push_back(e);

        if (log.best_epoch < 0 || val_nmse < log.best_val_nmse) {
            log.best_epoch = epoch;
            log.best_val_nmse = val_nmse;
            best_params.clear();
            for (const auto& p : store.all()) best_params.push_back(p.value);
        }
        log.wall_time_sec.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    // restore the validation-selected parameters before saving
    for (size_t i = 0; i < best_params.size(); ++i) store.all()[i].value = best_params[i];

    const std::string ckpt_base = (fs::path(run_dir) / "checkpoint").string();
    model::CheckpointMeta meta;
    meta.variant = config.variant;
    meta.init_seed = config.master_seed;
    meta.geometry_id = geometry.id();
    meta.normalization_scale = scale;
    save_checkpoint(ckpt_base, model, meta);
    log.save((fs::path(run_dir) / "trainlog.json").string());
    return {ckpt_base, log};
}

}  // namespace dudospect::harness
