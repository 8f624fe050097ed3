#pragma once

#include <string>
#include <vector>

#include "dudospect/harness/evaluate.hpp"

namespace dudospect::harness {

struct SweepRow {
    double x = 0.0;  // N or dose ratio
    std::string run_dir;
    double test_nmse_mean = 0.0, test_nmse_std = 0.0;
    double test_ssim_mean = 0.0, test_psnr_mean = 0.0;
};

struct SweepTable {
    std::string parameter;  // "iterations" or "dose_ratio"
    std::vector<SweepRow> rows;
    std::string to_csv() const;
    void save(const std::string& csv_path, const std::string& svg_path) const;
};

// Trains and evaluates one model per iteration count on a shared dataset.
SweepTable sweep_iterations(const ExperimentConfig& config, const DatasetManifest& manifest,
                            const std::vector<int>& n_values, const std::string& out_dir);

// Regenerates the dataset per dose (shared phantoms and full-dose counts,
// re-thinned), then trains and evaluates the configured variant per dose.
SweepTable sweep_dose(const ExperimentConfig& config, const std::vector<double>& dose_values,
                      const std::string& out_dir);

}  // namespace dudospect::harness
