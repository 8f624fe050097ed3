#pragma once

#include <string>

#include "dudospect/dataset.hpp"
#include "dudospect/model/joint_model.hpp"

namespace dudospect::harness {

// Full experiment description: geometry, phantom family, dose, model
// variant, schedule and seeds. Serializes to/from a JSON document; CLI
// flags override individual fields.
struct ExperimentConfig {
    GeometryParams geometry;
    PhantomFamily phantom_family = PhantomFamily::cardiac_ellipsoid;
    double myo_bg_ratio = 4.0;
    double defect_probability = 0.25;
    int train_cases = 40, val_cases = 8, test_cases = 16;
    double dose_ratio = 0.1;
    double total_counts = 2e6;
    int mlem_iterations = 30;

    model::ModelVariant variant;
    int epochs = 0;  // 0 = schedule default: desk 10/40, full 50/200
    int batch_size = 2;
    double lr_main = 1e-3;
    double lr_adc = 1e-4;
    double decay_per_epoch = 0.99;
    double w_image = 0.5, w_proj = 0.5;
    uint64_t master_seed = 20260809;
    std::string out_dir;
    std::string preset = "desk";  // "desk" or "full"

    static ExperimentConfig desk_preset();
    static ExperimentConfig full_preset();

    int effective_epochs() const;
    DatasetConfig dataset_config() const;
    void validate() const;

    std::string to_json_string() const;
    static ExperimentConfig from_json_string(const std::string& text);
    void save(const std::string& path) const;
    static ExperimentConfig load(const std::string& path);
};

// Output root override: relative out_dir values are placed under
// $DUDOSPECT_OUT_ROOT when it is set.
std::string resolve_out_dir(const std::string& out_dir);

}  // namespace dudospect::harness
