// Command-line front end: simulate datasets, train/evaluate models, run
// sweeps and build report bundles.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dudospect/dataset.hpp"
#include "dudospect/errors.hpp"
#include "dudospect/harness/config.hpp"
#include "dudospect/harness/evaluate.hpp"
#include "dudospect/harness/report.hpp"
#include "dudospect/harness/sweeps.hpp"
#include "dudospect/harness/train.hpp"

namespace fs = std::filesystem;
using namespace dudospect;
using harness::ExperimentConfig;

namespace {

std::vector<std::string> split_list(const std::string& csv) {
    std::vector<std::string> out;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

ExperimentConfig load_config_or_preset(const std::string& config_path, const std::string& preset) {
    if (!config_path.empty()) return ExperimentConfig::load(config_path);
    if (preset == "full") return ExperimentConfig::full_preset();
    return ExperimentConfig::desk_preset();
}

DatasetManifest open_dataset(const std::string& data_dir) {
    return DatasetManifest::load((fs::path(data_dir) / "manifest.json").string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"multi-pinhole cardiac SPECT simulation, reconstruction and dual-domain training"};
    app.require_subcommand(1);

    std::string config_path, preset, out_dir, data_dir, geometry_out, checkpoint_base, split = "test";
    std::string variant_name, n_list, dose_list, run_list;
    double dose_override = -1.0;
    int cases_override = -1, iters_override = -1, epochs_override = -1;
    long long seed_override = -1;

    auto add_config_opts = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON");
        cmd->add_option("--preset", preset, "desk or full (when no --config)");
        cmd->add_option("--seed", seed_override, "master seed override");
    };
    auto apply_overrides = [&](ExperimentConfig& cfg) {
        if (seed_override >= 0) cfg.master_seed = static_cast<uint64_t>(seed_override);
        if (dose_override > 0.0) cfg.dose_ratio = dose_override;
        if (cases_override > 0) cfg.train_cases = cases_override;
        if (!variant_name.empty()) cfg.variant.kind = model::variant_from_string(variant_name);
        if (iters_override > 0) cfg.variant.iterations = iters_override;
        if (epochs_override > 0) cfg.epochs = epochs_override;
        cfg.validate();
    };

    auto* simulate = app.add_subcommand("simulate", "generate a synthetic dataset");
    add_config_opts(simulate);
    simulate->add_option("--out", out_dir, "dataset output directory");
    simulate->add_option("--dose", dose_override, "dose ratio in (0,1]");
    simulate->add_option("--cases", cases_override, "training case count override");
    simulate->add_option("--geometry", geometry_out, "write the default geometry JSON here");

    auto* train_cmd = app.add_subcommand("train", "train a model variant");
    add_config_opts(train_cmd);
    train_cmd->add_option("--data", data_dir, "dataset directory (with manifest.json)")->required();
    train_cmd->add_option("--out", out_dir, "run output directory")->required();
    train_cmd->add_option("--variant", variant_name, "model variant");
    train_cmd->add_option("--iters", iters_override, "unrolled iteration count");
    train_cmd->add_option("--epochs", epochs_override, "epoch count override");

    auto* eval_cmd = app.add_subcommand("evaluate", "evaluate a checkpoint on a split");
    eval_cmd->add_option("--checkpoint", checkpoint_base, "checkpoint path base (no extension)")
        ->required();
    eval_cmd->add_option("--data", data_dir, "dataset directory")->required();
    eval_cmd->add_option("--split", split, "val or test");
    eval_cmd->add_option("--out", out_dir, "evaluation output directory")->required();

    auto* sweep_iters = app.add_subcommand("sweep-iters", "train/evaluate across iteration counts");
    add_config_opts(sweep_iters);
    sweep_iters->add_option("--data", data_dir, "dataset directory")->required();
    sweep_iters->add_option("--n", n_list, "comma-separated N values (1..6)")->required();
    sweep_iters->add_option("--out", out_dir, "sweep output directory")->required();

    auto* sweep_dose = app.add_subcommand("sweep-dose", "regenerate/train/evaluate across doses");
    add_config_opts(sweep_dose);
    sweep_dose->add_option("--doses", dose_list, "comma-separated dose ratios")->required();
    sweep_dose->add_option("--out", out_dir, "sweep output directory")->required();

    auto* report_cmd = app.add_subcommand("report", "aggregate runs into tables/plots/grids");
    report_cmd->add_option("--runs", run_list, "comma-separated run directories")->required();
    report_cmd->add_option("--out", out_dir, "report output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (simulate->parsed()) {
            if (!geometry_out.empty()) {
                ExperimentConfig cfg = load_config_or_preset(config_path, preset);
                apply_overrides(cfg);
                build_geometry(cfg.geometry).save_json(harness::resolve_out_dir(geometry_out));
                std::printf("geometry written to %s\n", geometry_out.c_str());
                if (out_dir.empty()) return 0;
            }
            if (out_dir.empty()) throw ConfigError("simulate needs --out (or --geometry)");
            ExperimentConfig cfg = load_config_or_preset(config_path, preset);
            apply_overrides(cfg);
            DatasetConfig dc = cfg.dataset_config();
            dc.out_dir = harness::resolve_out_dir(out_dir);
            const DatasetManifest manifest = build_dataset(dc);
            std::printf("dataset: %zu cases -> %s\n", manifest.cases.size(), dc.out_dir.c_str());
        } else if (train_cmd->parsed()) {
            ExperimentConfig cfg = load_config_or_preset(config_path, preset);
            apply_overrides(cfg);
            const DatasetManifest manifest = open_dataset(data_dir);
            const auto result = harness::train(cfg, manifest, harness::resolve_out_dir(out_dir));
            std::printf("trained %s: best epoch %d, val NMSE %.6f\n",
                        to_string(cfg.variant.kind).c_str(), result.log.best_epoch,
                        result.log.best_val_nmse);
        } else if (eval_cmd->parsed()) {
            const DatasetManifest manifest = open_dataset(data_dir);
            const auto result = harness::evaluate_checkpoint(checkpoint_base, manifest, split,
                                                             harness::resolve_out_dir(out_dir));
            const auto s = result.projection.summary();
            std::printf("projection NMSE %.4f%% +- %.4f%% over %zu cases\n", 100.0 * s.nmse_mean,
                        100.0 * s.nmse_std, result.projection.nmse_values.size());
        } else if (sweep_iters->parsed()) {
            ExperimentConfig cfg = load_config_or_preset(config_path, preset);
            apply_overrides(cfg);
            std::vector<int> ns;
            for (const auto& s : split_list(n_list)) ns.push_back(std::stoi(s));
            const DatasetManifest manifest = open_dataset(data_dir);
            const auto table =
                harness::sweep_iterations(cfg, manifest, ns, harness::resolve_out_dir(out_dir));
            std::printf("%s", table.to_csv().c_str());
        } else if (sweep_dose->parsed()) {
            ExperimentConfig cfg = load_config_or_preset(config_path, preset);
            apply_overrides(cfg);
            std::vector<double> doses;
            for (const auto& s : split_list(dose_list)) doses.push_back(std::stod(s));
            const auto table = harness::sweep_dose(cfg, doses, harness::resolve_out_dir(out_dir));
            std::printf("%s", table.to_csv().c_str());
        } else if (report_cmd->parsed()) {
            const auto summary =
                harness::report(split_list(run_list), harness::resolve_out_dir(out_dir));
            std::printf("report: %zu runs included, %zu skipped\n", summary.included_runs.size(),
                        summary.skipped_runs.size());
        }
    } catch (const NumericalError& e) {
        std::fprintf(stderr, "numerical failure: %s\n", e.what());
        return 3;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const ShapeError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
