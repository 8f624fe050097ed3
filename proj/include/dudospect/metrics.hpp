#pragma once

#include <span>
#include <string>
#include <vector>

#include "dudospect/tensors.hpp"

namespace dudospect {

// ||pred - ref||^2 / ||ref||^2 (fraction; tables report percent).
double nmse(std::span<const double> pred, std::span<const double> ref);
// ||pred - ref||_1 / ||ref||_1.
double nmae(std::span<const double> pred, std::span<const double> ref);
// 20 log10(max(ref) / rmse), capped at 200 dB for identical inputs.
double psnr(std::span<const double> pred, std::span<const double> ref);

struct SsimOptions {
    double k1 = 0.01, k2 = 0.03;
    double sigma = 1.5;
    int window = 11;  // truncated and renormalized at boundaries
};

// Mean local SSIM over a 3D field (Gaussian window, symmetric dynamic
// range over both inputs so ssim(a, b) == ssim(b, a)).
double ssim_volume(const VolumeTensor& pred, const VolumeTensor& ref, const SsimOptions& opt = {});
double ssim_field(std::span<const double> pred, std::span<const double> ref, int nx, int ny, int nz,
                  const SsimOptions& opt = {});
// Per-angle 2D SSIM, averaged over angles.
double ssim_projection(const ProjectionTensor& pred, const ProjectionTensor& ref,
                       const SsimOptions& opt = {});

double nmse(const VolumeTensor& pred, const VolumeTensor& ref);
double nmse(const ProjectionTensor& pred, const ProjectionTensor& ref);
double nmae(const VolumeTensor& pred, const VolumeTensor& ref);
double nmae(const ProjectionTensor& pred, const ProjectionTensor& ref);
double psnr(const VolumeTensor& pred, const VolumeTensor& ref);
double psnr(const ProjectionTensor& pred, const ProjectionTensor& ref);

struct TTestResult {
    double t = 0.0;
    double p = 0.0;  // two-sided
};

// Two-sided paired Student t-test on a - b.
TTestResult paired_t_test(std::span<const double> a, std::span<const double> b);

// Per-case metric table for one method/report.
struct MetricReport {
    std::string label;
    std::vector<std::string> case_ids;
    std::vector<double> nmse_values;
    std::vector<double> nmae_values;
    std::vector<double> ssim_values;
    std::vector<double> psnr_values;

    struct Summary {
        double nmse_mean = 0.0, nmse_std = 0.0;
        double nmae_mean = 0.0, nmae_std = 0.0;
        double ssim_mean = 0.0, ssim_std = 0.0;
        double psnr_mean = 0.0, psnr_std = 0.0;
    };
    Summary summary() const;

    // One row per case plus a mean +- std summary row.
    std::string to_csv() const;
    std::string to_json_string() const;
    static MetricReport from_json_string(const std::string& text);
    void save(const std::string& csv_path, const std::string& json_path) const;
};

double mean(std::span<const double> v);
double sample_std(std::span<const double> v);

}  // namespace dudospect
