#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "dudospect/errors.hpp"
#include "dudospect/harness/evaluate.hpp"
#include "dudospect/harness/report.hpp"
#include "dudospect/harness/sweeps.hpp"
#include "dudospect/harness/train.hpp"

using namespace dudospect;
using harness::ExperimentConfig;
namespace fs = std::filesystem;

namespace {

std::string temp_dir(const std::string& tag) {
    const auto dir = fs::temp_directory_path() / ("dudospect_harness_" + tag);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir.string();
}

ExperimentConfig micro_config() {
    ExperimentConfig c;
    c.geometry.image_size = {16, 16, 16};
    c.geometry.detector_bins = {16, 16};
    c.train_cases = 4;
    c.val_cases = 2;
    c.test_cases = 3;
    c.total_counts = 4e5;
    c.mlem_iterations = 8;
    c.variant.kind = model::VariantKind::joint_dudo;
    c.variant.iterations = 1;
    c.variant.base_width = 2;
    c.variant.imgnet_width = 2;
    c.variant.adc_growth = 2;
    c.epochs = 2;
    c.master_seed = 555;
    return c;
}

const DatasetManifest& micro_dataset() {
    static const DatasetManifest manifest = [] {
        auto cfg = micro_config();
        DatasetConfig dc = cfg.dataset_config();
        dc.out_dir = temp_dir("data");
        return build_dataset(dc);
    }();
    return manifest;
}

}  // namespace

TEST_CASE("config JSON round-trip and validation") {
    auto c = micro_config();
    c.out_dir = "runs/demo";
    const auto back = ExperimentConfig::from_json_string(c.to_json_string());
    CHECK(back.to_json_string() == c.to_json_string());
    CHECK(back.effective_epochs() == 2);

    auto bad = micro_config();
    bad.lr_main = 0.0;
    CHECK_THROWS_AS(ExperimentConfig::from_json_string(bad.to_json_string()), ConfigError);
    CHECK_THROWS_AS(ExperimentConfig::from_json_string("{not json"), ConfigError);

    auto full = ExperimentConfig::full_preset();
    CHECK(full.train_cases == 200);
    CHECK(full.val_cases == 74);
    CHECK(full.test_cases == 200);
    // full-size preset covers 474 cases in total
    const auto dc = full.dataset_config();
    CHECK(dc.train_cases + dc.val_cases + dc.test_cases == 474);
    CHECK(full.effective_epochs() == 50);
    full.variant.kind = model::VariantKind::attnunet_proj;
    CHECK(full.effective_epochs() == 200);
    auto desk = ExperimentConfig::desk_preset();
    desk.variant.kind = model::VariantKind::unet_proj;
    CHECK(desk.effective_epochs() == 40);
}

TEST_CASE("training: schedule, log structure, checkpoint selection") {
    const auto& manifest = micro_dataset();
    auto cfg = micro_config();
    const auto run_dir = temp_dir("train");
    const auto result = harness::train(cfg, manifest, run_dir);
    const auto& log = result.log;

    REQUIRE(log.epochs.size() == 2);
    for (int e = 0; e < 2; ++e) {
        // exact exponential decay per parameter group
        CHECK(log.epochs[size_t(e)].lr_main ==
              doctest::Approx(1e-3 * std::pow(0.99, e)).epsilon(1e-12));
        CHECK(log.epochs[size_t(e)].lr_adc ==
              doctest::Approx(1e-4 * std::pow(0.99, e)).epsilon(1e-12));
        CHECK(std::isfinite(log.epochs[size_t(e)].loss_total));
        CHECK(log.epochs[size_t(e)].val_nmse > 0.0);
    }
    // the selected checkpoint is the argmin of validation NMSE
    double best = 1e300;
    int best_epoch = -1;
    for (const auto& e : log.epochs)
        if (e.val_nmse < best) {
            best = e.val_nmse;
            best_epoch = e.epoch;
        }
    CHECK(log.best_epoch == best_epoch);
    CHECK(log.best_val_nmse == best);

    CHECK(fs::exists(fs::path(run_dir) / "checkpoint.ntar"));
    CHECK(fs::exists(fs::path(run_dir) / "checkpoint.json"));
    CHECK(fs::exists(fs::path(run_dir) / "trainlog.json"));
    const auto reloaded = harness::TrainingLog::load((fs::path(run_dir) / "trainlog.json").string());
    CHECK(reloaded.deterministic_json() == log.deterministic_json());
}

TEST_CASE("training is deterministic: identical logs across reruns") {
    const auto& manifest = micro_dataset();
    auto cfg = micro_config();
    const auto r1 = harness::train(cfg, manifest, temp_dir("det1"));
    const auto r2 = harness::train(cfg, manifest, temp_dir("det2"));
    CHECK(r1.log.deterministic_json() == r2.log.deterministic_json());

    cfg.master_seed = 556;
    const auto r3 = harness::train(cfg, manifest, temp_dir("det3"));
    CHECK(r3.log.deterministic_json() != r1.log.deterministic_json());
}

TEST_CASE("evaluation: ground-truth oracle scores perfectly, baseline matches direct metrics") {
    const auto& manifest = micro_dataset();

    struct OraclePredictor : harness::Predictor {
        std::string label() const override { return "oracle"; }
        ProjectionTensor predict_projection(const DatasetCase& c) override { return c.p_fd_19a; }
        std::optional<VolumeTensor> predict_volume(const DatasetCase& c) override {
            return c.i_fd_19a;
        }
    } oracle;

    const auto out = temp_dir("eval_oracle");
    const auto result = harness::evaluate(oracle, manifest, "test", out);
    REQUIRE(result.projection.nmse_values.size() == manifest.test_ids.size());
    for (double v : result.projection.nmse_values) CHECK(v == 0.0);
    for (double v : result.projection.ssim_values) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
    for (double v : result.image.nmse_values) CHECK(v == 0.0);
    for (double v : result.projection.psnr_values) CHECK(v == 200.0);

    // the baseline row equals metrics computed directly on dataset tensors
    const auto c0 = load_case(manifest, manifest.test_ids[0]);
    CHECK(result.baseline_projection.nmse_values[0] ==
          doctest::Approx(nmse(c0.p_ld_9a, c0.p_fd_19a)).epsilon(1e-12));
    CHECK(result.baseline_image.nmse_values[0] ==
          doctest::Approx(nmse(c0.i_ld_9a, c0.i_fd_19a)).epsilon(1e-12));

    CHECK(fs::exists(fs::path(out) / "metrics_projection.csv"));
    CHECK(fs::exists(fs::path(out) / "eval_samples.ntar"));
}

TEST_CASE("trained checkpoint evaluates end-to-end and reports split-sized tables") {
    const auto& manifest = micro_dataset();
    auto cfg = micro_config();
    const auto run_dir = temp_dir("train_eval");
    const auto tr = harness::train(cfg, manifest, run_dir);
    const auto ev = harness::evaluate_checkpoint(tr.checkpoint_base, manifest, "test",
                                                 (fs::path(run_dir) / "eval_test").string());
    CHECK(ev.projection.nmse_values.size() == manifest.test_ids.size());
    CHECK(ev.image.nmse_values.size() == manifest.test_ids.size());
    for (double v : ev.projection.nmse_values) CHECK(std::isfinite(v));

    // report over a single run: no p-value column entries, idempotent bytes
    const auto rep1 = temp_dir("rep1");
    harness::report({run_dir}, rep1);
    const auto rep2 = temp_dir("rep2");
    harness::report({run_dir}, rep2);
    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    };
    const auto t1 = slurp((fs::path(rep1) / "projection_table.csv").string());
    const auto t2 = slurp((fs::path(rep2) / "projection_table.csv").string());
    CHECK(t1 == t2);
    CHECK(t1.find("baseline_ld9a") != std::string::npos);
    CHECK(t1.find("joint_dudo") != std::string::npos);
    // single run: every p-value cell is '-'
    std::stringstream lines(t1);
    std::string line;
    std::getline(lines, line);  // header
    while (std::getline(lines, line)) CHECK(line.substr(line.rfind(',') + 1) == "-");

    // report with a missing run dir still produces the bundle
    const auto rep3 = temp_dir("rep3");
    const auto summary = harness::report({run_dir, "/nonexistent/run"}, rep3);
    CHECK(summary.included_runs.size() == 1);
    CHECK(summary.skipped_runs.size() == 1);

    // two-method report: the paired t-test column fills in against the
    // joint_dudo reference
    auto cfg2 = micro_config();
    cfg2.variant.kind = model::VariantKind::attnunet_proj;
    cfg2.epochs = 1;
    const auto run2 = temp_dir("train_eval2");
    const auto tr2 = harness::train(cfg2, manifest, run2);
    harness::evaluate_checkpoint(tr2.checkpoint_base, manifest, "test",
                                 (fs::path(run2) / "eval_test").string());
    const auto rep4 = temp_dir("rep4");
    harness::report({run_dir, run2}, rep4);
    const auto table = slurp((fs::path(rep4) / "projection_table.csv").string());
    bool has_numeric_p = false;
    std::stringstream ls(table);
    std::string row;
    std::getline(ls, row);
    while (std::getline(ls, row)) {
        const auto cell = row.substr(row.rfind(',') + 1);
        if (row.rfind("attnunet_proj", 0) == 0) has_numeric_p = cell != "-" && !cell.empty();
        if (row.rfind("joint_dudo", 0) == 0) CHECK(cell == "-");
    }
    CHECK(has_numeric_p);
    CHECK(fs::exists(fs::path(rep4) / "projection_grid.pgm"));
    CHECK(fs::exists(fs::path(rep4) / "volume_grid.pgm"));
}

TEST_CASE("image-domain baseline evaluates through its direct volume output") {
    const auto& manifest = micro_dataset();
    auto cfg = micro_config();
    cfg.variant.kind = model::VariantKind::attnunet_img;
    cfg.epochs = 1;
    const auto run_dir = temp_dir("train_img");
    const auto tr = harness::train(cfg, manifest, run_dir);
    const auto ev = harness::evaluate_checkpoint(tr.checkpoint_base, manifest, "test",
                                                 (fs::path(run_dir) / "eval_test").string());
    CHECK(ev.image.nmse_values.size() == manifest.test_ids.size());
    CHECK(ev.projection.nmse_values.size() == manifest.test_ids.size());
    for (double v : ev.image.nmse_values) CHECK(std::isfinite(v));
}

TEST_CASE("iteration sweep produces one row per N and writes its artifacts") {
    const auto& manifest = micro_dataset();
    auto cfg = micro_config();
    const auto out = temp_dir("sweep_iters");
    const auto table = harness::sweep_iterations(cfg, manifest, {1, 2}, out);
    REQUIRE(table.rows.size() == 2);
    CHECK(table.rows[0].x == 1.0);
    CHECK(table.rows[1].x == 2.0);
    for (const auto& row : table.rows) CHECK(std::isfinite(row.test_nmse_mean));
    CHECK(fs::exists(fs::path(out) / "sweep_iterations.csv"));
    CHECK(fs::exists(fs::path(out) / "sweep_iterations.svg"));

    // single N -> degenerate one-row table; out-of-range N rejected
    const auto single = harness::sweep_iterations(cfg, manifest, {1}, temp_dir("sweep_one"));
    CHECK(single.rows.size() == 1);
    CHECK_THROWS_AS(harness::sweep_iterations(cfg, manifest, {7}, temp_dir("sweep_bad")),
                    ConfigError);
}

TEST_CASE("dose sweep regenerates datasets with shared phantoms") {
    auto cfg = micro_config();
    cfg.train_cases = 2;
    cfg.val_cases = 1;
    cfg.test_cases = 1;
    cfg.epochs = 1;
    const auto out = temp_dir("sweep_dose");
    const auto table = harness::sweep_dose(cfg, {0.2, 1.0}, out);
    REQUIRE(table.rows.size() == 2);
    CHECK(fs::exists(fs::path(out) / "sweep_dose.csv"));

    // shared master seed -> identical phantom set across doses
    const auto lo = DatasetManifest::load((fs::path(out) / "dose020.0pct" / "data" / "manifest.json").string());
    const auto hi = DatasetManifest::load((fs::path(out) / "dose100.0pct" / "data" / "manifest.json").string());
    REQUIRE(lo.cases.size() == hi.cases.size());
    for (size_t i = 0; i < lo.cases.size(); ++i)
        CHECK(lo.cases[i].phantom_crc32 == hi.cases[i].phantom_crc32);
    CHECK_THROWS_AS(harness::sweep_dose(cfg, {1.5}, temp_dir("sweep_dose_bad")), ConfigError);
}

TEST_CASE("geometry mismatch between config and dataset is rejected") {
    const auto& manifest = micro_dataset();
    auto cfg = micro_config();
    cfg.geometry.image_size = {20, 20, 20};
    CHECK_THROWS_AS(harness::train(cfg, manifest, temp_dir("mismatch")), ConfigError);
}

#ifdef DUDOSPECT_CLI_PATH
TEST_CASE("CLI: geometry emission, bad config exit code, unknown dataset") {
    const std::string cli = DUDOSPECT_CLI_PATH;
    const auto dir = temp_dir("cli");

    const std::string geom = dir + "/geom.json";
    CHECK(std::system((cli + " simulate --geometry " + geom + " > /dev/null").c_str()) == 0);
    CHECK(fs::exists(geom));
    CHECK_NOTHROW(ScannerGeometry::load_json(geom));

    // invalid config file -> exit 2
    const std::string bad_cfg = dir + "/bad.json";
    {
        std::ofstream f(bad_cfg);
        f << "{\"lr_main\": 0.0}";
    }
    const int rc =
        std::system((cli + " simulate --config " + bad_cfg + " --out " + dir + "/d 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(rc) == 2);

    // train on a missing dataset -> exit 1 (I/O failure)
    const int rc2 = std::system(
        (cli + " train --data /nonexistent --out " + dir + "/r 2>/dev/null").c_str());
    CHECK(WEXITSTATUS(rc2) == 1);

    // relative outputs land under DUDOSPECT_OUT_ROOT when it is set
    const auto root = dir + "/outroot";
    fs::create_directories(root);
    const int rc3 = std::system(("DUDOSPECT_OUT_ROOT=" + root + " " + cli +
                                 " simulate --geometry rel_geom.json > /dev/null").c_str());
    CHECK(WEXITSTATUS(rc3) == 0);
    CHECK(fs::exists(fs::path(root) / "rel_geom.json"));
}
#endif
