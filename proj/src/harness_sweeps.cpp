#include "dudospect/harness/sweeps.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dudospect/errors.hpp"
#include "dudospect/viz.hpp"

namespace dudospect::harness {

namespace fs = std::filesystem;

namespace {
std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.9g", v);
    return buf;
}
}  // namespace

std::string SweepTable::to_csv() const {
    std::ostringstream out;
    out << parameter << ",run_dir,test_nmse_mean,test_nmse_std,test_ssim_mean,test_psnr_mean\n";
    for (const auto& r : rows)
        out << fmt(r.x) << ',' << r.run_dir << ',' << fmt(r.test_nmse_mean) << ','
            << fmt(r.test_nmse_std) << ',' << fmt(r.test_ssim_mean) << ',' << fmt(r.test_psnr_mean)
            << '\n';
    return out.str();
}

void SweepTable::save(const std::string& csv_path, const std::string& svg_path) const {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw IoError("cannot write sweep table '" + csv_path + "'");
    out << to_csv();
    PlotSeries series;
    series.label = "test NMSE";
    for (const auto& r : rows) {
        series.x.push_back(r.x);
        series.y.push_back(r.test_nmse_mean);
    }
    write_svg_line_plot(svg_path, "test NMSE vs " + parameter, parameter, "NMSE", {series});
}

namespace {

SweepRow run_point(const ExperimentConfig& config, const DatasetManifest& manifest,
                   const std::string& run_dir, double x) {
    const TrainResult tr = train(config, manifest, run_dir);
    const EvaluationResult ev =
        evaluate_checkpoint(tr.checkpoint_base, manifest, "test", (fs::path(run_dir) / "eval_test").string());
    SweepRow row;
    row.x = x;
    row.run_dir = run_dir;
    const auto s = ev.projection.summary();
    row.test_nmse_mean = s.nmse_mean;
    row.test_nmse_std = s.nmse_std;
    row.test_ssim_mean = s.ssim_mean;
    row.test_psnr_mean = s.psnr_mean;
    return row;
}

}  // namespace

SweepTable sweep_iterations(const ExperimentConfig& config, const DatasetManifest& manifest,
                            const std::vector<int>& n_values, const std::string& out_dir) {
    if (n_values.empty()) throw ConfigError("iteration sweep needs at least one N");
    for (int n : n_values)
        if (n < 1 || n > 6) throw ConfigError("iteration sweep covers N in 1..6");
    fs::create_directories(out_dir);
    SweepTable table;
    table.parameter = "iterations";
    for (int n : n_values) {
        ExperimentConfig c = config;
        c.variant.iterations = n;
        const std::string run_dir = (fs::path(out_dir) / ("n" + std::to_string(n))).string();
        table.rows.push_back(run_point(c, manifest, run_dir, static_cast<double>(n)));
    }
    table.save((fs::path(out_dir) / "sweep_iterations.csv").string(),
               (fs::path(out_dir) / "sweep_iterations.svg").string());
    return table;
}

SweepTable sweep_dose(const ExperimentConfig& config, const std::vector<double>& dose_values,
                      const std::string& out_dir) {
    if (dose_values.empty()) throw ConfigError("dose sweep needs at least one dose");
    for (double d : dose_values)
        if (!(d > 0.0 && d <= 1.0)) throw ConfigError("dose values must lie in (0, 1]");
    fs::create_directories(out_dir);
    SweepTable table;
    table.parameter = "dose_ratio";
    for (double dose : dose_values) {
        ExperimentConfig c = config;
        c.dose_ratio = dose;
        char tag[32];
        std::snprintf(tag, sizeof(tag), "dose%05.1fpct", 100.0 * dose);
        const std::string point_dir = (fs::path(out_dir) / tag).string();
        DatasetConfig dc = c.dataset_config();
        dc.out_dir = (fs::path(point_dir) / "data").string();
        const DatasetManifest manifest = build_dataset(dc);
        table.rows.push_back(
            run_point(c, manifest, (fs::path(point_dir) / "run").string(), dose));
    }
    table.save((fs::path(out_dir) / "sweep_dose.csv").string(),
               (fs::path(out_dir) / "sweep_dose.svg").string());
    return table;
}

}  // namespace dudospect::harness
