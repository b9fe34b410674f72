#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "ros/errors.hpp"

namespace ros {

/// One scored target prediction. Ground-truth labels follow the ordered
/// class list: values below n_known are known classes, anything else is a
/// target-private class. predicted_label == n_known means "unknown".
struct Prediction {
    int sample_id = -1;
    int predicted_label = -1;
    int ground_truth = -1;
    double max_confidence = 0.0;
};

struct MetricsReport {
    double os_star = 0.0;  // percent
    double unk = 0.0;      // percent
    double os = 0.0;       // percent
    double hos = 0.0;      // percent
    std::optional<double> auc_roc;  // in [0,1]
    double openness = 0.0;
    std::map<int, double> per_class_accuracy;   // known class id -> percent
    std::vector<int> excluded_known_classes;    // known classes with no target samples
    int n_runs = 1;
    std::map<std::string, double> mean;  // populated by aggregate_runs
    std::map<std::string, double> stddev;
    std::string config_hash;
};

/// Mean per-class accuracy over the known classes, in percent. Known
/// classes absent from the target are excluded from the mean (and listed
/// in the report by the caller).
inline double os_star(const std::vector<Prediction>& preds, int n_known,
                      std::vector<int>* excluded = nullptr,
                      std::map<int, double>* per_class = nullptr) {
    std::vector<long> total(static_cast<std::size_t>(n_known), 0);
    std::vector<long> correct(static_cast<std::size_t>(n_known), 0);
    for (const Prediction& p : preds) {
        if (p.ground_truth < 0 || p.ground_truth >= n_known) continue;
        total[static_cast<std::size_t>(p.ground_truth)]++;
        if (p.predicted_label == p.ground_truth)
            correct[static_cast<std::size_t>(p.ground_truth)]++;
    }
    double sum = 0.0;
    int present = 0;
    for (int c = 0; c < n_known; ++c) {
        if (total[static_cast<std::size_t>(c)] == 0) {
            if (excluded) excluded->push_back(c);
            continue;
        }
        double acc = 100.0 * static_cast<double>(correct[static_cast<std::size_t>(c)]) /
                     static_cast<double>(total[static_cast<std::size_t>(c)]);
        if (per_class) (*per_class)[c] = acc;
        sum += acc;
        ++present;
    }
    if (present == 0) throw UndefinedMetricError("os_star: no known-class samples");
    return sum / present;
}

/// Accuracy of the single unknown class, in percent: fraction of
/// target-private samples predicted as label n_known.
inline double unk_accuracy(const std::vector<Prediction>& preds, int n_known) {
    long total = 0, correct = 0;
    for (const Prediction& p : preds) {
        if (p.ground_truth < n_known) continue;
        ++total;
        if (p.predicted_label == n_known) ++correct;
    }
    if (total == 0) throw UndefinedMetricError("unk_accuracy: no unknown-class samples");
    return 100.0 * static_cast<double>(correct) / static_cast<double>(total);
}

/// OS = k/(k+1) * OS* + 1/(k+1) * UNK.
inline double os_combined(double os_star_pct, double unk_pct, int n_known) {
    if (n_known < 1) throw ValidationError("os: n_known must be >= 1");
    double k = static_cast<double>(n_known);
    return (k / (k + 1.0)) * os_star_pct + (1.0 / (k + 1.0)) * unk_pct;
}

/// HOS = 2 * OS* * UNK / (OS* + UNK); zero when either side is zero.
inline double hos(double os_star_pct, double unk_pct) {
    if (os_star_pct <= 0.0 || unk_pct <= 0.0) return 0.0;
    return 2.0 * os_star_pct * unk_pct / (os_star_pct + unk_pct);
}

inline double openness(int n_known, int n_total) {
    if (n_known < 1 || n_known > n_total)
        throw ValidationError("openness: need 1 <= n_known <= n_total");
    return 1.0 - static_cast<double>(n_known) / static_cast<double>(n_total);
}

/// Mann-Whitney AUC: probability that a random known sample scores above a
/// random unknown one, ties counted 1/2. Computed through midranks.
inline double auc_roc(const std::vector<double>& scores, const std::vector<bool>& is_known) {
    if (scores.size() != is_known.size())
        throw ShapeError("auc_roc: scores and labels differ in length");
    const std::size_t n = scores.size();
    std::size_t n_pos = 0;
    for (bool b : is_known) n_pos += b ? 1 : 0;
    std::size_t n_neg = n - n_pos;
    if (n_pos == 0 || n_neg == 0)
        throw UndefinedMetricError("auc_roc: need at least one known and one unknown");

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::vector<double> rank(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        double midrank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
        for (std::size_t k = i; k <= j; ++k) rank[order[k]] = midrank;
        i = j + 1;
    }
    double rank_sum_pos = 0.0;
    for (std::size_t k = 0; k < n; ++k)
        if (is_known[k]) rank_sum_pos += rank[k];
    double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0);
    return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

/// Full report from predictions (plus optional normality scores for AUC).
inline MetricsReport compute_metrics(const std::vector<Prediction>& preds, int n_known,
                                     int n_total_classes,
                                     const std::vector<double>& normality_scores = {},
                                     const std::vector<bool>& score_is_known = {}) {
    MetricsReport r;
    r.os_star = os_star(preds, n_known, &r.excluded_known_classes, &r.per_class_accuracy);
    r.unk = unk_accuracy(preds, n_known);
    r.os = os_combined(r.os_star, r.unk, n_known);
    r.hos = hos(r.os_star, r.unk);
    r.openness = openness(n_known, n_total_classes);
    if (!normality_scores.empty()) r.auc_roc = auc_roc(normality_scores, score_is_known);
    return r;
}

/// Mean and sample standard deviation per metric across runs of one
/// configuration. HOS is aggregated as the mean of per-run HOS values.
inline MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports) {
    if (reports.empty()) throw ValidationError("aggregate_runs: no reports");
    for (const MetricsReport& r : reports)
        if (r.config_hash != reports.front().config_hash)
            throw ValidationError("aggregate_runs: mixed configuration hashes");

    auto stats = [&](auto getter) -> std::pair<double, double> {
        double m = 0.0;
        for (const auto& r : reports) m += getter(r);
        m /= static_cast<double>(reports.size());
        double var = 0.0;
        if (reports.size() > 1) {
            for (const auto& r : reports) {
                double d = getter(r) - m;
                var += d * d;
            }
            var /= static_cast<double>(reports.size() - 1);
        }
        return {m, std::sqrt(var)};
    };

    MetricsReport out = reports.front();
    out.n_runs = static_cast<int>(reports.size());
    auto put = [&](const std::string& key, auto getter) {
        auto [m, s] = stats(getter);
        out.mean[key] = m;
        out.stddev[key] = s;
        return m;
    };
    out.os_star = put("os_star", [](const MetricsReport& r) { return r.os_star; });
    out.unk = put("unk", [](const MetricsReport& r) { return r.unk; });
    out.os = put("os", [](const MetricsReport& r) { return r.os; });
    out.hos = put("hos", [](const MetricsReport& r) { return r.hos; });
    bool all_auc = std::all_of(reports.begin(), reports.end(),
                               [](const MetricsReport& r) { return r.auc_roc.has_value(); });
    if (all_auc)
        out.auc_roc = put("auc_roc", [](const MetricsReport& r) { return *r.auc_roc; });
    return out;
}

}  // namespace ros
