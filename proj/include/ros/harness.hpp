#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ros/config.hpp"
#include "ros/dataset_io.hpp"
#include "ros/metrics.hpp"
#include "ros/stage2.hpp"
#include "ros/svg_plot.hpp"

namespace ros {

using Scalar = float;  // training scalar type used by the harness

struct OsdaTask {
    Dataset source;
    Dataset target;
    ClassSplit split;
};

/// Materialize the dataset a config describes.
inline OsdaTask load_task(const ExperimentConfig& cfg) {
    OsdaTask task;
    if (cfg.dataset == "synthetic") {
        SyntheticDataset d = generate_synthetic(cfg.synthetic_spec(), cfg.known_window_start);
        task.source = std::move(d.source);
        task.target = std::move(d.target);
        task.split = std::move(d.split);
    } else {
        FolderLoadOptions opt;
        opt.source_domain = cfg.source_domain;
        opt.target_domain = cfg.target_domain;
        opt.n_known = cfg.n_known;
        opt.class_list_path = cfg.class_list;
        opt.image_size = cfg.image_size;
        opt.known_window_start = cfg.known_window_start;
        FolderDataset d = load_image_folder(cfg.data_root, opt);
        task.source = std::move(d.source);
        task.target = std::move(d.target);
        task.split = std::move(d.split);
    }
    return task;
}

// ---------------------------------------------------------------------------
// Metrics persistence
// ---------------------------------------------------------------------------

inline nlohmann::json metrics_to_json(const MetricsReport& r) {
    nlohmann::json j;
    j["os_star"] = r.os_star;
    j["unk"] = r.unk;
    j["os"] = r.os;
    j["hos"] = r.hos;
    if (r.auc_roc) j["auc_roc"] = *r.auc_roc;
    j["openness"] = r.openness;
    nlohmann::json pca = nlohmann::json::object();
    for (auto& [cls, acc] : r.per_class_accuracy) pca[std::to_string(cls)] = acc;
    j["per_class_accuracy"] = pca;
    j["excluded_known_classes"] = r.excluded_known_classes;
    j["n_runs"] = r.n_runs;
    j["config_hash"] = r.config_hash;
    if (!r.mean.empty()) {
        j["mean"] = r.mean;
        j["stddev"] = r.stddev;
    }
    return j;
}

inline void write_metrics_json(const MetricsReport& r, const std::string& path,
                               std::optional<std::uint64_t> seed = std::nullopt) {
    nlohmann::json j = metrics_to_json(r);
    if (seed) j["seed"] = *seed;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// CSV readers for offline re-scoring
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split_csv_row(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (c != '\r') {
            cur += c;
        }
    }
    fields.push_back(cur);
    return fields;
}

}  // namespace detail

inline std::vector<Prediction> read_predictions_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("predictions file is empty", 1);
    ++line_no;
    auto header = detail::split_csv_row(line);
    const std::vector<std::string> expected = {"sample_id", "predicted_label", "ground_truth",
                                               "max_confidence"};
    if (header != std::vector<std::string>(expected.begin(), expected.end()))
        throw ParseError("predictions header must be sample_id,predicted_label,ground_truth,"
                         "max_confidence", line_no);
    std::vector<Prediction> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split_csv_row(line);
        if (f.size() != 4) throw ParseError("expected 4 fields", line_no);
        try {
            Prediction p;
            p.sample_id = std::stoi(f[0]);
            p.predicted_label = std::stoi(f[1]);
            p.ground_truth = std::stoi(f[2]);
            p.max_confidence = std::stod(f[3]);
            out.push_back(p);
        } catch (const std::exception&) {
            throw ParseError("malformed prediction row", line_no);
        }
    }
    return out;
}

struct ScoreRow {
    int sample_id = -1;
    double rotation_score = 0.0;
    double entropy_score = 0.0;
    double normality = 0.0;
    std::string partition;
};

inline std::vector<ScoreRow> read_scores_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("scores file is empty", 1);
    ++line_no;
    auto header = detail::split_csv_row(line);
    const std::vector<std::string> expected = {"sample_id", "rotation_score", "entropy_score",
                                               "normality", "assigned_partition"};
    if (header != std::vector<std::string>(expected.begin(), expected.end()))
        throw ParseError("scores header must be sample_id,rotation_score,entropy_score,"
                         "normality,assigned_partition", line_no);
    std::vector<ScoreRow> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        auto f = detail::split_csv_row(line);
        if (f.size() != 5) throw ParseError("expected 5 fields", line_no);
        try {
            ScoreRow r;
            r.sample_id = std::stoi(f[0]);
            r.rotation_score = std::stod(f[1]);
            r.entropy_score = std::stod(f[2]);
            r.normality = std::stod(f[3]);
            r.partition = f[4];
            if (r.partition != "knw" && r.partition != "unk")
                throw std::invalid_argument(r.partition);
            out.push_back(r);
        } catch (const std::exception&) {
            throw ParseError("malformed score row", line_no);
        }
    }
    return out;
}

/// Recompute the full metrics report from exported artifacts alone.
/// `scores_path` may be empty, which drops the AUC. n_total <= 0 infers the
/// class count from the largest ground-truth label.
inline MetricsReport score_files(const std::string& predictions_path,
                                 const std::string& scores_path, int n_known, int n_total = 0) {
    std::vector<Prediction> preds = read_predictions_csv(predictions_path);
    if (preds.empty()) throw ParseError("predictions file has no rows", 2);
    int max_gt = 0;
    for (const Prediction& p : preds) max_gt = std::max(max_gt, p.ground_truth);
    if (n_total <= 0) n_total = std::max(n_known, max_gt + 1);

    std::vector<double> scores;
    std::vector<bool> is_known;
    if (!scores_path.empty()) {
        std::map<int, bool> known_of;
        for (const Prediction& p : preds) known_of[p.sample_id] = p.ground_truth < n_known;
        for (const ScoreRow& r : read_scores_csv(scores_path)) {
            auto it = known_of.find(r.sample_id);
            if (it == known_of.end())
                throw ValidationError("score row for sample " + std::to_string(r.sample_id) +
                                      " has no matching prediction");
            scores.push_back(r.normality);
            is_known.push_back(it->second);
        }
    }
    return compute_metrics(preds, n_known, n_total, scores, is_known);
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

namespace fs = std::filesystem;

inline void ensure_dir(const fs::path& p) {
    std::error_code ec;
    fs::create_directories(p, ec);
    if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

struct PipelineResult {
    std::vector<MetricsReport> per_seed;
    MetricsReport aggregate;
    std::string config_hash;
    fs::path run_dir;
};

namespace detail {

template <typename F>
auto run_stage(const char* stage_name, F&& fn) {
    try {
        return fn();
    } catch (const TrainingError&) {
        throw;
    } catch (const std::exception& e) {
        throw TrainingError(std::string(stage_name) + " failed: " + e.what());
    }
}

inline std::vector<bool> known_flags_for_records(const std::vector<NormalityRecord>& records,
                                                 const Dataset& target, int n_known) {
    std::map<int, bool> gt;
    for (const Sample& s : target.samples) gt[s.sample_id] = s.class_label < n_known;
    std::vector<bool> out;
    out.reserve(records.size());
    for (const NormalityRecord& r : records) out.push_back(gt.at(r.sample_id));
    return out;
}

}  // namespace detail

/// Stage I -> scoring -> separation -> transfer -> Stage II -> prediction ->
/// metrics, once per seed, persisting every intermediate artifact under
/// <output_dir>/<config_hash>/<seed>/.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string hash = cfg.hash();
    OsdaTask task = load_task(cfg);
    const int n_known = task.split.n_known();
    const int n_total = task.split.n_total();

    PipelineResult result;
    result.config_hash = hash;
    result.run_dir = fs::path(cfg.output_dir) / hash;
    ensure_dir(result.run_dir);
    cfg.save((result.run_dir / "config.ini").string());

    for (std::uint64_t seed : cfg.seeds) {
        fs::path seed_dir = result.run_dir / std::to_string(seed);
        ensure_dir(seed_dir / "checkpoints");
        std::ofstream log((seed_dir / "log.txt").string());
        log << "config_hash " << hash << " seed " << seed << "\n";

        std::vector<double> normality;
        std::vector<bool> known_flags;
        SeparationResult separation;
        NetworkBundle<Scalar> bundle2;

        if (cfg.pipeline == "full") {
            auto bundle1 = NetworkBundle<Scalar>::make_stage1(cfg.encoder_spec(), n_known, seed);
            detail::run_stage("stage1", [&] {
                return train_stage1(bundle1, task.source, cfg.train_options(1, seed), &log);
            });
            save_checkpoint(bundle1, (seed_dir / "checkpoints" / "stage1.ckpt").string(), hash);

            auto records = detail::run_stage("scoring", [&] {
                return compute_normality_scores(bundle1, task.target, cfg.score_mode(),
                                                !cfg.no_anchor_s1);
            });
            separation = separate_target(std::move(records));
            write_scores_csv(separation, (seed_dir / "scores.csv").string());
            write_separation_json(separation, (seed_dir / "separation.json").string());
            log << "separation threshold " << separation.threshold << " knw "
                << separation.knw_ids.size() << " unk " << separation.unk_ids.size() << "\n";

            for (const NormalityRecord& r : separation.records) normality.push_back(r.normality);
            known_flags = detail::known_flags_for_records(separation.records, task.target, n_known);

            if (cfg.stage2_transfer)
                bundle2 = transfer_stage1_to_stage2(bundle1, seed,
                                                    static_cast<Scalar>(cfg.unknown_lr_multiplier));
            else
                bundle2 = NetworkBundle<Scalar>::make_stage2(cfg.encoder_spec(), n_known,
                                                             derive_seed({seed, 0xF2E5Au}));
        } else {
            // source_only control: fresh stage-two bundle, no target usage
            bundle2 = NetworkBundle<Scalar>::make_stage2(cfg.encoder_spec(), n_known,
                                                         derive_seed({seed, 0xF2E5Au}));
        }

        detail::run_stage("stage2", [&] {
            return train_stage2(bundle2, task.source, task.target, separation,
                                cfg.train_options(2, seed), &log);
        });
        save_checkpoint(bundle2, (seed_dir / "checkpoints" / "stage2.ckpt").string(), hash);

        auto preds = detail::run_stage("predict", [&] { return predict(bundle2, task.target); });
        write_predictions_csv(preds, (seed_dir / "predictions.csv").string());

        MetricsReport report = compute_metrics(preds, n_known, n_total, normality, known_flags);
        report.config_hash = hash;
        write_metrics_json(report, (seed_dir / "metrics.json").string(), seed);
        log << "metrics os_star=" << report.os_star << " unk=" << report.unk
            << " hos=" << report.hos << "\n";
        result.per_seed.push_back(std::move(report));
    }

    result.aggregate = aggregate_runs(result.per_seed);
    write_metrics_json(result.aggregate, (result.run_dir / "metrics.json").string());
    return result;
}

// ---------------------------------------------------------------------------
// Stage-I-only evaluation (AUC over normality scores)
// ---------------------------------------------------------------------------

struct Stage1Report {
    std::vector<double> auc_per_seed;
    double mean = 0.0;
    double stddev = 0.0;
    std::string config_hash;
    fs::path run_dir;
};

inline Stage1Report evaluate_stage1_only(const ExperimentConfig& cfg) {
    cfg.validate();
    const std::string hash = cfg.hash();
    OsdaTask task = load_task(cfg);
    const int n_known = task.split.n_known();

    Stage1Report report;
    report.config_hash = hash;
    report.run_dir = fs::path(cfg.output_dir) / hash;
    ensure_dir(report.run_dir);
    cfg.save((report.run_dir / "config.ini").string());

    for (std::uint64_t seed : cfg.seeds) {
        fs::path seed_dir = report.run_dir / std::to_string(seed);
        ensure_dir(seed_dir / "checkpoints");
        std::ofstream log((seed_dir / "log.txt").string());

        auto bundle1 = NetworkBundle<Scalar>::make_stage1(cfg.encoder_spec(), n_known, seed);
        detail::run_stage("stage1", [&] {
            return train_stage1(bundle1, task.source, cfg.train_options(1, seed), &log);
        });
        save_checkpoint(bundle1, (seed_dir / "checkpoints" / "stage1.ckpt").string(), hash);

        auto records = detail::run_stage("scoring", [&] {
            return compute_normality_scores(bundle1, task.target, cfg.score_mode(),
                                            !cfg.no_anchor_s1);
        });
        SeparationResult sep = separate_target(std::move(records));
        write_scores_csv(sep, (seed_dir / "scores.csv").string());
        write_separation_json(sep, (seed_dir / "separation.json").string());

        std::vector<double> scores;
        for (const NormalityRecord& r : sep.records) scores.push_back(r.normality);
        std::vector<bool> flags = detail::known_flags_for_records(sep.records, task.target, n_known);
        double auc = auc_roc(scores, flags);
        log << "stage1 auc_roc " << auc << "\n";

        nlohmann::json j;
        j["auc_roc"] = auc;
        j["config_hash"] = hash;
        j["seed"] = seed;
        std::ofstream mj((seed_dir / "stage1_metrics.json").string());
        mj << j.dump(2) << '\n';
        report.auc_per_seed.push_back(auc);
    }

    double m = 0.0;
    for (double a : report.auc_per_seed) m += a;
    m /= static_cast<double>(report.auc_per_seed.size());
    double var = 0.0;
    if (report.auc_per_seed.size() > 1) {
        for (double a : report.auc_per_seed) var += (a - m) * (a - m);
        var /= static_cast<double>(report.auc_per_seed.size() - 1);
    }
    report.mean = m;
    report.stddev = std::sqrt(var);

    nlohmann::json j;
    j["auc_roc_per_seed"] = report.auc_per_seed;
    j["auc_roc_mean"] = report.mean;
    j["auc_roc_stddev"] = report.stddev;
    j["config_hash"] = hash;
    std::ofstream mj((report.run_dir / "stage1_metrics.json").string());
    mj << j.dump(2) << '\n';
    return report;
}

// ---------------------------------------------------------------------------
// Openness sweep
// ---------------------------------------------------------------------------

struct OpennessSweepSpec {
    // each entry: number of known classes + the window start offsets to
    // average over, e.g. {25, {0, 25, 40}}
    std::vector<std::pair<int, std::vector<int>>> entries;

    /// Format: "25:0,25,40;10:0,10,20;5:0,5,10"
    static OpennessSweepSpec parse(const std::string& text) {
        OpennessSweepSpec spec;
        std::stringstream ss(text);
        std::string entry;
        while (std::getline(ss, entry, ';')) {
            if (entry.empty()) continue;
            std::size_t colon = entry.find(':');
            if (colon == std::string::npos)
                throw ValidationError("sweep spec entry needs n_known:starts, got '" + entry + "'");
            int k = std::stoi(entry.substr(0, colon));
            std::vector<int> starts;
            std::stringstream sl(entry.substr(colon + 1));
            std::string tok;
            while (std::getline(sl, tok, ',')) starts.push_back(std::stoi(tok));
            if (starts.empty()) throw ValidationError("sweep spec entry has no windows");
            spec.entries.emplace_back(k, std::move(starts));
        }
        if (spec.entries.empty()) throw ValidationError("sweep spec is empty");
        return spec;
    }
};

struct OpennessSweepRow {
    int n_known = 0;
    double openness = 0.0;
    double os_star = 0.0;
    double unk = 0.0;
    double hos = 0.0;
    int n_windows = 0;
};

struct OpennessSweepResult {
    std::vector<OpennessSweepRow> rows;
    fs::path sweep_dir;
};

/// One pipeline per (n_known, window) configuration; rows average the
/// windows of each openness level. Emits the numeric series and an SVG.
inline OpennessSweepResult run_openness_sweep(const ExperimentConfig& base,
                                              const OpennessSweepSpec& sweep) {
    base.validate();
    OsdaTask probe = load_task(base);
    const int n_total = probe.split.n_total();
    for (const auto& [k, starts] : sweep.entries)
        for (int s : starts)
            if (k < 1 || s < 0 || s + k > n_total)
                throw ValidationError("sweep window [" + std::to_string(s) + ", " +
                                      std::to_string(s + k) + ") out of range for " +
                                      std::to_string(n_total) + " classes");

    OpennessSweepResult result;
    result.sweep_dir = fs::path(base.output_dir) / ("sweep_" + base.hash());
    ensure_dir(result.sweep_dir);

    for (const auto& [k, starts] : sweep.entries) {
        OpennessSweepRow row;
        row.n_known = k;
        row.n_windows = static_cast<int>(starts.size());
        for (int s : starts) {
            ExperimentConfig cfg = base;
            cfg.n_known = k;
            if (cfg.dataset == "synthetic") cfg.n_unknown = n_total - k;
            cfg.known_window_start = s;
            PipelineResult pr = run_pipeline(cfg);
            row.os_star += pr.aggregate.os_star;
            row.unk += pr.aggregate.unk;
            row.hos += pr.aggregate.hos;
            row.openness = pr.aggregate.openness;
        }
        row.os_star /= row.n_windows;
        row.unk /= row.n_windows;
        row.hos /= row.n_windows;
        result.rows.push_back(row);
    }

    std::ofstream csv((result.sweep_dir / "sweep.csv").string());
    if (!csv) throw IoError("cannot write sweep.csv");
    csv << "n_known,openness,os_star,unk,hos,n_windows\n";
    csv << std::fixed << std::setprecision(6);
    for (const OpennessSweepRow& r : result.rows)
        csv << r.n_known << ',' << r.openness << ',' << r.os_star << ',' << r.unk << ',' << r.hos
            << ',' << r.n_windows << '\n';

    std::vector<PlotSeries> series(3);
    series[0].name = "OS*";
    series[1].name = "UNK";
    series[2].name = "HOS";
    for (const OpennessSweepRow& r : result.rows) {
        series[0].points.emplace_back(r.openness, r.os_star);
        series[1].points.emplace_back(r.openness, r.unk);
        series[2].points.emplace_back(r.openness, r.hos);
    }
    write_svg_plot((result.sweep_dir / "sweep.svg").string(), "Accuracy vs openness", "openness",
                   "accuracy (%)", series);
    return result;
}

// ---------------------------------------------------------------------------
// Ablation matrix
// ---------------------------------------------------------------------------

struct AblationRow {
    std::string label;
    std::string metric_name;  // "auc_roc" or "hos"
    double value = 0.0;
    std::string config_hash;
};

struct AblationResult {
    std::vector<AblationRow> rows;
    fs::path ablation_dir;
};

/// The standard switch matrix: stage-one rows are scored by AUC-ROC of the
/// normality score, stage-two rows by the final HOS.
inline AblationResult run_ablation_matrix(const ExperimentConfig& base) {
    base.validate();
    AblationResult result;
    result.ablation_dir = fs::path(base.output_dir) / ("ablation_" + base.hash());
    ensure_dir(result.ablation_dir);

    auto stage1_row = [&](const std::string& label, auto mutate) {
        ExperimentConfig cfg = base;
        mutate(cfg);
        Stage1Report rep = evaluate_stage1_only(cfg);
        result.rows.push_back({label, "auc_roc", rep.mean, rep.config_hash});
    };
    stage1_row("full", [](ExperimentConfig&) {});
    stage1_row("no_anchor_s1", [](ExperimentConfig& c) { c.no_anchor_s1 = true; });
    stage1_row("no_center_loss", [](ExperimentConfig& c) { c.no_center_loss = true; });
    stage1_row("no_rot_score", [](ExperimentConfig& c) { c.no_rot_score = true; });
    stage1_row("no_ent_score", [](ExperimentConfig& c) { c.no_ent_score = true; });

    auto stage2_row = [&](const std::string& label, auto mutate) {
        ExperimentConfig cfg = base;
        mutate(cfg);
        PipelineResult pr = run_pipeline(cfg);
        result.rows.push_back({label, "hos", pr.aggregate.hos, pr.config_hash});
    };
    stage2_row("full_pipeline", [](ExperimentConfig&) {});
    stage2_row("no_anchor_s2", [](ExperimentConfig& c) { c.no_anchor_s2 = true; });
    stage2_row("no_entropy_s2", [](ExperimentConfig& c) { c.no_entropy_s2 = true; });

    nlohmann::json j = nlohmann::json::array();
    std::ofstream csv((result.ablation_dir / "ablation.csv").string());
    csv << "label,metric,value,config_hash\n";
    for (const AblationRow& r : result.rows) {
        nlohmann::json row;
        row["label"] = r.label;
        row["metric"] = r.metric_name;
        row["value"] = r.value;
        row["config_hash"] = r.config_hash;
        j.push_back(row);
        csv << r.label << ',' << r.metric_name << ',' << r.value << ',' << r.config_hash << '\n';
    }
    std::ofstream out((result.ablation_dir / "ablation.json").string());
    out << j.dump(2) << '\n';
    return result;
}

}  // namespace ros
