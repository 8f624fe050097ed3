#include "dudospect/harness/report.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "dudospect/archive.hpp"
#include "dudospect/errors.hpp"
#include "dudospect/harness/config.hpp"
#include "dudospect/metrics.hpp"
#include "dudospect/viz.hpp"

namespace dudospect::harness {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunData {
    std::string dir;
    std::string method;
    MetricReport projection, image;
    MetricReport baseline_projection, baseline_image;
    bool has_samples = false;
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::optional<RunData> load_run(const std::string& dir) {
    const fs::path eval_dir = fs::path(dir) / "eval_test";
    const fs::path config_path = fs::path(dir) / "config.json";
    if (!fs::exists(eval_dir / "metrics_projection.json") || !fs::exists(config_path))
        return std::nullopt;
    RunData run;
    run.dir = dir;
    const ExperimentConfig config = ExperimentConfig::load(config_path.string());
    run.method = to_string(config.variant.kind);
    run.projection = MetricReport::from_json_string(read_text((eval_dir / "metrics_projection.json").string()));
    run.image = MetricReport::from_json_string(read_text((eval_dir / "metrics_image.json").string()));
    run.baseline_projection =
        MetricReport::from_json_string(read_text((eval_dir / "baseline_projection.json").string()));
    run.baseline_image =
        MetricReport::from_json_string(read_text((eval_dir / "baseline_image.json").string()));
    run.has_samples = fs::exists(eval_dir / "eval_samples.ntar");
    return run;
}

void write_table(const std::string& path, const std::vector<RunData>& runs, bool image_domain,
                 const MetricReport* baseline, int reference_index) {
    std::ostringstream out;
    out << "method,nmse_percent_mean,nmse_percent_std,nmae_percent_mean,nmae_percent_std,"
           "ssim_mean,ssim_std,psnr_mean,psnr_std,p_value_nmse_vs_reference\n";
    auto row = [&](const std::string& name, const MetricReport& r, const std::string& pval) {
        const auto s = r.summary();
        out << name << ',' << fmt(100.0 * s.nmse_mean) << ',' << fmt(100.0 * s.nmse_std) << ','
            << fmt(100.0 * s.nmae_mean) << ',' << fmt(100.0 * s.nmae_std) << ',' << fmt(s.ssim_mean)
            << ',' << fmt(s.ssim_std) << ',' << fmt(s.psnr_mean) << ',' << fmt(s.psnr_std) << ','
            << pval << '\n';
    };
    const MetricReport* ref =
        reference_index >= 0
            ? (image_domain ? &runs[static_cast<size_t>(reference_index)].image
                            : &runs[static_cast<size_t>(reference_index)].projection)
            : nullptr;
    auto pval_against_ref = [&](const MetricReport& r) -> std::string {
        if (!ref || &r == ref) return "-";
        if (r.nmse_values.size() != ref->nmse_values.size() || r.nmse_values.size() < 2) return "-";
        try {
            const TTestResult t = paired_t_test(r.nmse_values, ref->nmse_values);
            return fmt(t.p);
        } catch (const Error&) {
            return "-";
        }
    };
    if (baseline) row("baseline_ld9a", *baseline, pval_against_ref(*baseline));
    for (const auto& run : runs)
        row(run.method, image_domain ? run.image : run.projection,
            pval_against_ref(image_domain ? run.image : run.projection));
    std::ofstream file(path, std::ios::binary);
    if (!file) throw IoError("cannot write table '" + path + "'");
    file << out.str();
}

ProjectionTensor sample_projection(const TensorArchive& ar, const std::string& name) {
    const NamedTensor& t = ar.get(name);
    ProjectionTensor p = ProjectionTensor::zeros(static_cast<int>(t.shape[0]),
                                                 static_cast<int>(t.shape[1]),
                                                 static_cast<int>(t.shape[2]));
    p.data = t.as_f64();
    return p;
}

VolumeTensor sample_volume(const TensorArchive& ar, const std::string& name) {
    const NamedTensor& t = ar.get(name);
    GridSpec grid;
    grid.nx = static_cast<int>(t.shape[0]);
    grid.ny = static_cast<int>(t.shape[1]);
    grid.nz = static_cast<int>(t.shape[2]);
    grid.voxel_size_mm = 1.0;
    VolumeTensor v = VolumeTensor::zeros(grid);
    v.data = t.as_f64();
    return v;
}

}  // namespace

ReportSummary report(const std::vector<std::string>& run_dirs, const std::string& out_dir) {
    if (run_dirs.empty()) throw ValidationError("report needs at least one run directory");
    fs::create_directories(out_dir);

    ReportSummary summary;
    std::vector<RunData> runs;
    for (const auto& dir : run_dirs) {
        if (auto run = load_run(dir)) {
            runs.push_back(std::move(*run));
            summary.included_runs.push_back(dir);
        } else {
            summary.skipped_runs.push_back(dir);
        }
    }
    if (runs.empty()) throw ValidationError("no completed runs found for the report");

    int reference_index = -1;
    for (size_t i = 0; i < runs.size(); ++i)
        if (runs[i].method == "joint_dudo") reference_index = static_cast<int>(i);
    // p-values only make sense with a reference plus at least one other run
    if (runs.size() < 2) reference_index = -1;

    write_table((fs::path(out_dir) / "projection_table.csv").string(), runs, false,
                &runs[0].baseline_projection, reference_index);
    write_table((fs::path(out_dir) / "image_table.csv").string(), runs, true,
                &runs[0].baseline_image, reference_index);

    // side-by-side slice grids from the first evaluated test case
    std::vector<GridPanel> proj_panels, vol_panels;
    for (const auto& run : runs) {
        if (!run.has_samples) continue;
        const TensorArchive ar =
            TensorArchive::load((fs::path(run.dir) / "eval_test" / "eval_samples.ntar").string());
        const ProjectionTensor pred = sample_projection(ar, "pred_projection");
        const VolumeTensor vol = sample_volume(ar, "pred_volume");
        if (proj_panels.empty()) {
            const ProjectionTensor input = sample_projection(ar, "input_projection");
            const ProjectionTensor target = sample_projection(ar, "target_projection");
            proj_panels.push_back(projection_panel(input, input.n_angles / 2, "input"));
            proj_panels.push_back(projection_panel(target, target.n_angles / 2, "target"));
            vol_panels.push_back(volume_mid_slice_panel(sample_volume(ar, "input_volume"), "input"));
            vol_panels.push_back(volume_mid_slice_panel(sample_volume(ar, "target_volume"), "target"));
        }
        proj_panels.push_back(projection_panel(pred, pred.n_angles / 2, run.method));
        vol_panels.push_back(volume_mid_slice_panel(vol, run.method));
    }
    if (!proj_panels.empty()) {
        write_pgm_grid((fs::path(out_dir) / "projection_grid.pgm").string(), proj_panels);
        write_pgm_grid((fs::path(out_dir) / "volume_grid.pgm").string(), vol_panels);
    }

    json j;
    j["included_runs"] = summary.included_runs;
    j["skipped_runs"] = summary.skipped_runs;
    std::ofstream manifest((fs::path(out_dir) / "report.json").string(), std::ios::binary);
    manifest << j.dump(2) << "\n";
    return summary;
}

}  // namespace dudospect::harness
