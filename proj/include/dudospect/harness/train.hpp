#pragma once

#include <memory>
#include <string>
#include <vector>

#include "dudospect/harness/config.hpp"
#include "dudospect/model/joint_model.hpp"

namespace dudospect::harness {

struct EpochLog {
    int epoch = 0;  // 0-based
    double lr_main = 0.0, lr_adc = 0.0;
    double loss_image = 0.0, loss_projection = 0.0, loss_total = 0.0;  // train means
    double val_nmse = 0.0;
};

struct TrainingLog {
    std::vector<EpochLog> epochs;
    int best_epoch = -1;
    double best_val_nmse = 0.0;
    std::vector<double> wall_time_sec;  // per epoch; excluded from the
                                        // deterministic comparison form

    // Deterministic content only (timing stripped) — two runs with the
    // same config and seed must produce byte-identical strings.
    std::string deterministic_json() const;
    std::string to_json_string() const;  // includes timing
    void save(const std::string& path) const;
    static TrainingLog load(const std::string& path);
};

// Normalized in-memory view of one dataset case.
struct PreparedCase {
    std::string id;
    model::CaseInputs<float> inputs;
    model::CaseTargets targets;  // normalized
    ProjectionTensor p_ld_raw;   // unnormalized, for baseline rows
    VolumeTensor i_ld_raw;
    ProjectionTensor p_fd_raw;
    VolumeTensor i_fd_raw;
};

PreparedCase prepare_case(const DatasetCase& c, double per_bin_scale);

struct TrainResult {
    std::string checkpoint_base;  // path without extension
    TrainingLog log;
};

// Adam + per-epoch exponential decay; ADC parameters (name prefix "adc.")
// form their own learning-rate group. Deterministic in config.master_seed.
// Writes config echo, trainlog.json and checkpoint.{ntar,json} into run_dir.
TrainResult train(const ExperimentConfig& config, const DatasetManifest& manifest,
                  const std::string& run_dir);

}  // namespace dudospect::harness
