#include "dudospect/harness/config.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dudospect/errors.hpp"

namespace dudospect::harness {

using nlohmann::json;

ExperimentConfig ExperimentConfig::desk_preset() { return ExperimentConfig{}; }

ExperimentConfig ExperimentConfig::full_preset() {
    ExperimentConfig c;
    c.train_cases = 200;
    c.val_cases = 74;
    c.test_cases = 200;
    c.preset = "full";
    return c;
}

int ExperimentConfig::effective_epochs() const {
    if (epochs > 0) return epochs;
    const bool joint = model::variant_iterates(variant.kind);
    if (preset == "full") return joint ? 50 : 200;
    return joint ? 10 : 40;
}

DatasetConfig ExperimentConfig::dataset_config() const {
    DatasetConfig d;
    d.geometry = geometry;
    d.phantom_family = phantom_family;
    d.myo_bg_ratio = myo_bg_ratio;
    d.defect_probability = defect_probability;
    d.train_cases = train_cases;
    d.val_cases = val_cases;
    d.test_cases = test_cases;
    d.dose_ratio = dose_ratio;
    d.total_counts = total_counts;
    d.mlem_iterations = mlem_iterations;
    d.master_seed = master_seed;
    return d;
}

void ExperimentConfig::validate() const {
    if (lr_main <= 0.0 || lr_adc <= 0.0) throw ConfigError("learning rates must be positive");
    if (!(decay_per_epoch > 0.0 && decay_per_epoch <= 1.0))
        throw ConfigError("decay_per_epoch must lie in (0, 1]");
    if (effective_epochs() < 1) throw ConfigError("epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (!(dose_ratio > 0.0 && dose_ratio <= 1.0)) throw ConfigError("dose_ratio must lie in (0, 1]");
    if (train_cases < 1 || val_cases < 1 || test_cases < 1)
        throw ConfigError("every split needs at least one case");
    if (variant.iterations < 1) throw ConfigError("variant iterations must be >= 1");
    if (preset != "desk" && preset != "full") throw ConfigError("preset must be 'desk' or 'full'");
}

std::string ExperimentConfig::to_json_string() const {
    json j;
    j["format"] = "dudospect-config-v1";
    j["geometry"] = {{"image_size", {geometry.image_size[0], geometry.image_size[1], geometry.image_size[2]}},
                     {"detector_bins", {geometry.detector_bins[0], geometry.detector_bins[1]}},
                     {"voxel_size_mm", geometry.voxel_size_mm},
                     {"radius_mm", geometry.radius_mm},
                     {"focal_mm", geometry.focal_mm},
                     {"outer_column_z_mm", geometry.outer_column_z_mm},
                     {"central_arc_deg", geometry.central_arc_deg},
                     {"outer_arc_deg", geometry.outer_arc_deg}};
    j["phantom"] = {{"family", to_string(phantom_family)},
                    {"myo_bg_ratio", myo_bg_ratio},
                    {"defect_probability", defect_probability}};
    j["splits"] = {{"train", train_cases}, {"val", val_cases}, {"test", test_cases}};
    j["dose_ratio"] = dose_ratio;
    j["total_counts"] = total_counts;
    j["mlem_iterations"] = mlem_iterations;
    j["variant"] = {{"kind", to_string(variant.kind)},
                    {"iterations", variant.iterations},
                    {"base_width", variant.base_width},
                    {"imgnet_width", variant.imgnet_width},
                    {"adc_growth", variant.adc_growth}};
    j["epochs"] = epochs;
    j["batch_size"] = batch_size;
    j["lr_main"] = lr_main;
    j["lr_adc"] = lr_adc;
    j["decay_per_epoch"] = decay_per_epoch;
    j["w_image"] = w_image;
    j["w_proj"] = w_proj;
    j["master_seed"] = master_seed;
    j["out_dir"] = out_dir;
    j["preset"] = preset;
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config parse failure: ") + e.what());
    }
    ExperimentConfig c;
    try {
        if (j.contains("geometry")) {
            const auto& g = j["geometry"];
            if (g.contains("image_size"))
                for (int i = 0; i < 3; ++i) c.geometry.image_size[static_cast<size_t>(i)] = g["image_size"][static_cast<size_t>(i)].get<int>();
            if (g.contains("detector_bins"))
                for (int i = 0; i < 2; ++i) c.geometry.detector_bins[static_cast<size_t>(i)] = g["detector_bins"][static_cast<size_t>(i)].get<int>();
            if (g.contains("voxel_size_mm")) c.geometry.voxel_size_mm = g["voxel_size_mm"].get<double>();
            if (g.contains("radius_mm")) c.geometry.radius_mm = g["radius_mm"].get<double>();
            if (g.contains("focal_mm")) c.geometry.focal_mm = g["focal_mm"].get<double>();
            if (g.contains("outer_column_z_mm")) c.geometry.outer_column_z_mm = g["outer_column_z_mm"].get<double>();
            if (g.contains("central_arc_deg")) c.geometry.central_arc_deg = g["central_arc_deg"].get<double>();
            if (g.contains("outer_arc_deg")) c.geometry.outer_arc_deg = g["outer_arc_deg"].get<double>();
        }
        if (j.contains("phantom")) {
            const auto& p = j["phantom"];
            if (p.contains("family")) c.phantom_family = phantom_family_from_string(p["family"].get<std::string>());
            if (p.contains("myo_bg_ratio")) c.myo_bg_ratio = p["myo_bg_ratio"].get<double>();
            if (p.contains("defect_probability")) c.defect_probability = p["defect_probability"].get<double>();
        }
        if (j.contains("splits")) {
            c.train_cases = j["splits"].value("train", c.train_cases);
            c.val_cases = j["splits"].value("val", c.val_cases);
            c.test_cases = j["splits"].value("test", c.test_cases);
        }
        c.dose_ratio = j.value("dose_ratio", c.dose_ratio);
        c.total_counts = j.value("total_counts", c.total_counts);
        c.mlem_iterations = j.value("mlem_iterations", c.mlem_iterations);
        if (j.contains("variant")) {
            const auto& v = j["variant"];
            if (v.contains("kind")) c.variant.kind = model::variant_from_string(v["kind"].get<std::string>());
            c.variant.iterations = v.value("iterations", c.variant.iterations);
            c.variant.base_width = v.value("base_width", c.variant.base_width);
            c.variant.imgnet_width = v.value("imgnet_width", c.variant.imgnet_width);
            c.variant.adc_growth = v.value("adc_growth", c.variant.adc_growth);
        }
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.lr_main = j.value("lr_main", c.lr_main);
        c.lr_adc = j.value("lr_adc", c.lr_adc);
        c.decay_per_epoch = j.value("decay_per_epoch", c.decay_per_epoch);
        c.w_image = j.value("w_image", c.w_image);
        c.w_proj = j.value("w_proj", c.w_proj);
        c.master_seed = j.value("master_seed", c.master_seed);
        c.out_dir = j.value("out_dir", c.out_dir);
        c.preset = j.value("preset", c.preset);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config field error: ") + e.what());
    }
    c.validate();
    return c;
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write config '" + path + "'");
    out << to_json_string() << "\n";
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json_string(ss.str());
}

std::string resolve_out_dir(const std::string& out_dir) {
    const char* root = std::getenv("DUDOSPECT_OUT_ROOT");
    if (!root || out_dir.empty()) return out_dir;
    const std::filesystem::path p(out_dir);
    if (p.is_absolute()) return out_dir;
    return (std::filesystem::path(root) / p).string();
}

}  // namespace dudospect::harness
