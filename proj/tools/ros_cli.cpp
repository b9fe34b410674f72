// Command-line entry points for the rotation-based open-set domain
// adaptation pipeline: dataset generation, stage-wise training, full runs,
// openness sweeps, ablations and offline re-scoring.

#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "ros/harness.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitTraining = 3;
constexpr int kExitIo = 4;

ros::ExperimentConfig load_config(const std::string& path,
                                  const std::vector<std::string>& overrides) {
    ros::ExperimentConfig cfg;
    if (!path.empty()) cfg = ros::ExperimentConfig::load(path);
    for (const std::string& kv : overrides) {
        std::size_t eq = kv.find('=');
        if (eq == std::string::npos)
            throw ros::ValidationError("--set expects key=value, got '" + kv + "'");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void print_report(const ros::MetricsReport& r) {
    std::printf("  %-8s %-8s %-8s %-8s %-8s\n", "OS*", "UNK", "OS", "HOS", "AUC");
    std::printf("  %-8.1f %-8.1f %-8.1f %-8.1f ", r.os_star, r.unk, r.os, r.hos);
    if (r.auc_roc)
        std::printf("%-8.3f\n", *r.auc_roc);
    else
        std::printf("%-8s\n", "-");
    if (!r.mean.empty()) {
        std::printf("  mean+/-std over %d runs: HOS %.1f+/-%.1f, OS* %.1f+/-%.1f, "
                    "UNK %.1f+/-%.1f\n",
                    r.n_runs, r.mean.at("hos"), r.stddev.at("hos"), r.mean.at("os_star"),
                    r.stddev.at("os_star"), r.mean.at("unk"), r.stddev.at("unk"));
    }
}

int dispatch(CLI::App& app, const std::string& config_path,
             const std::vector<std::string>& overrides, const std::string& command,
             const std::string& windows, const std::string& predictions_path,
             const std::string& scores_path, int score_n_known, int score_n_total,
             const std::string& export_root, std::uint64_t seed_override, bool has_seed) {
    (void)app;
    if (command == "score") {
        ros::MetricsReport r =
            ros::score_files(predictions_path, scores_path, score_n_known, score_n_total);
        std::cout << ros::metrics_to_json(r).dump(2) << std::endl;
        return kExitOk;
    }
    if (command == "separate") {
        auto rows = ros::read_scores_csv(scores_path);
        std::vector<ros::NormalityRecord> records;
        for (const auto& row : rows) {
            ros::NormalityRecord rec;
            rec.sample_id = row.sample_id;
            rec.rotation_score = row.rotation_score;
            rec.entropy_score = row.entropy_score;
            rec.normality = row.normality;
            records.push_back(rec);
        }
        ros::SeparationResult sep = ros::separate_target(std::move(records));
        ros::write_separation_json(sep, predictions_path.empty() ? "separation.json"
                                                                 : predictions_path);
        std::printf("threshold %.6f, %zu known, %zu unknown\n", sep.threshold,
                    sep.knw_ids.size(), sep.unk_ids.size());
        return kExitOk;
    }

    ros::ExperimentConfig cfg = load_config(config_path, overrides);
    if (has_seed) cfg.seeds = {seed_override};

    if (command == "synth") {
        cfg.validate();
        if (cfg.dataset != "synthetic")
            throw ros::ValidationError("synth needs a synthetic dataset config");
        ros::SyntheticDataset d =
            ros::generate_synthetic(cfg.synthetic_spec(), cfg.known_window_start);
        std::string root = export_root.empty() ? (cfg.output_dir + "/synth") : export_root;
        ros::export_image_folder(d.source, root, "source");
        ros::export_image_folder(d.target, root, "target");
        std::printf("wrote %zu source and %zu target images under %s\n", d.source.size(),
                    d.target.size(), root.c_str());
        return kExitOk;
    }
    if (command == "stage1") {
        ros::Stage1Report rep = ros::evaluate_stage1_only(cfg);
        std::printf("stage1 AUC-ROC mean %.4f (std %.4f) over %zu seed(s)\n", rep.mean,
                    rep.stddev, rep.auc_per_seed.size());
        std::printf("artifacts: %s\n", rep.run_dir.string().c_str());
        return kExitOk;
    }
    if (command == "stage2") {
        // resumes from the stage-one artifacts of the same config hash
        cfg.validate();
        const std::string hash = cfg.hash();
        ros::OsdaTask task = ros::load_task(cfg);
        for (std::uint64_t seed : cfg.seeds) {
            auto seed_dir = std::filesystem::path(cfg.output_dir) / hash / std::to_string(seed);
            ros::NetworkBundle<ros::Scalar> bundle1;
            ros::load_checkpoint(bundle1, (seed_dir / "checkpoints" / "stage1.ckpt").string());
            ros::SeparationResult sep =
                ros::read_separation_json((seed_dir / "separation.json").string());
            ros::NetworkBundle<ros::Scalar> bundle2 =
                cfg.stage2_transfer
                    ? ros::transfer_stage1_to_stage2(
                          bundle1, seed, static_cast<ros::Scalar>(cfg.unknown_lr_multiplier))
                    : ros::NetworkBundle<ros::Scalar>::make_stage2(
                          cfg.encoder_spec(), task.split.n_known(), ros::derive_seed({seed, 0xF2E5Au}));
            std::ofstream log((seed_dir / "log.txt").string(), std::ios::app);
            ros::train_stage2(bundle2, task.source, task.target, sep,
                              cfg.train_options(2, seed), &log);
            ros::save_checkpoint(bundle2, (seed_dir / "checkpoints" / "stage2.ckpt").string(),
                                 hash);
            auto preds = ros::predict(bundle2, task.target);
            ros::write_predictions_csv(preds, (seed_dir / "predictions.csv").string());
            ros::MetricsReport report = ros::compute_metrics(preds, task.split.n_known(),
                                                             task.split.n_total());
            report.config_hash = hash;
            ros::write_metrics_json(report, (seed_dir / "metrics.json").string(), seed);
            std::printf("seed %llu: HOS %.1f (OS* %.1f, UNK %.1f)\n",
                        static_cast<unsigned long long>(seed), report.hos, report.os_star,
                        report.unk);
        }
        return kExitOk;
    }
    if (command == "run") {
        ros::PipelineResult pr = ros::run_pipeline(cfg);
        std::printf("run %s complete, %zu seed(s)\n", pr.config_hash.c_str(),
                    pr.per_seed.size());
        print_report(pr.aggregate);
        std::printf("artifacts: %s\n", pr.run_dir.string().c_str());
        return kExitOk;
    }
    if (command == "sweep") {
        ros::OpennessSweepSpec spec = ros::OpennessSweepSpec::parse(windows);
        ros::OpennessSweepResult sr = ros::run_openness_sweep(cfg, spec);
        std::printf("  %-8s %-9s %-8s %-8s %-8s\n", "known", "openness", "OS*", "UNK", "HOS");
        for (const auto& row : sr.rows)
            std::printf("  %-8d %-9.3f %-8.1f %-8.1f %-8.1f\n", row.n_known, row.openness,
                        row.os_star, row.unk, row.hos);
        std::printf("artifacts: %s\n", sr.sweep_dir.string().c_str());
        return kExitOk;
    }
    if (command == "ablate") {
        ros::AblationResult ar = ros::run_ablation_matrix(cfg);
        std::printf("  %-16s %-8s %-8s\n", "label", "metric", "value");
        for (const auto& row : ar.rows)
            std::printf("  %-16s %-8s %-8.2f\n", row.label.c_str(), row.metric_name.c_str(),
                        row.value);
        std::printf("artifacts: %s\n", ar.ablation_dir.string().c_str());
        return kExitOk;
    }
    throw ros::ValidationError("unknown command: " + command);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Rotation-based open-set domain adaptation pipeline"};
    app.require_subcommand(1);

    std::string config_path, windows, predictions_path, scores_path, export_root;
    std::vector<std::string> overrides;
    int score_n_known = 0, score_n_total = 0;
    std::uint64_t seed_override = 0;
    bool has_seed = false;

    auto add_common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "config file (key = value lines)");
        sub->add_option("--set", overrides, "override a config key, e.g. --set epochs_stage1=4");
        sub->add_option("--seed", seed_override, "run a single specific seed")
            ->each([&](const std::string&) { has_seed = true; });
    };

    add_common(app.add_subcommand("synth", "generate the synthetic dataset as an image folder"));
    app.get_subcommand("synth")->add_option("--export-root", export_root,
                                            "folder to write source/ and target/ trees into");
    add_common(app.add_subcommand("stage1", "train stage one and report AUC-ROC"));
    add_common(app.add_subcommand("stage2", "train stage two from persisted stage-one artifacts"));
    add_common(app.add_subcommand("run", "full two-stage pipeline over all seeds"));
    auto* sweep = app.add_subcommand("sweep", "openness sweep over known-class windows");
    add_common(sweep);
    sweep->add_option("--windows", windows, "e.g. 25:0,25,40;10:0,10,20;5:0,5,10")->required();
    add_common(app.add_subcommand("ablate", "run the ablation switch matrix"));

    auto* sep = app.add_subcommand("separate", "recompute the known/unknown split from a scores table");
    sep->add_option("--scores", scores_path, "scores.csv path")->required();
    sep->add_option("--output", predictions_path, "output separation.json path");

    auto* score = app.add_subcommand("score", "recompute metrics from exported files");
    score->add_option("--predictions", predictions_path, "predictions.csv path")->required();
    score->add_option("--scores", scores_path, "scores.csv path (optional, enables AUC)");
    score->add_option("--n-known", score_n_known, "number of known classes")->required();
    score->add_option("--n-total", score_n_total, "total class count (0 = infer)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kExitOk : kExitValidation;
    }

    try {
        std::string command = app.get_subcommands().front()->get_name();
        return dispatch(app, config_path, overrides, command, windows, predictions_path,
                        scores_path, score_n_known, score_n_total, export_root, seed_override,
                        has_seed);
    } catch (const ros::ValidationError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const ros::ParseError& e) {
        std::fprintf(stderr, "parse error: %s\n", e.what());
        return kExitValidation;
    } catch (const ros::DomainError& e) {
        std::fprintf(stderr, "validation error: %s\n", e.what());
        return kExitValidation;
    } catch (const ros::TrainingError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return kExitTraining;
    } catch (const ros::IoError& e) {
        std::fprintf(stderr, "i/o error: %s\n", e.what());
        return kExitIo;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitTraining;
    }
}
