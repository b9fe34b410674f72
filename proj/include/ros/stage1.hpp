#pragma once

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ros/dataset.hpp"
#include "ros/losses.hpp"
#include "ros/network.hpp"
#include "ros/optimizer.hpp"

namespace ros {

/// Knobs shared by both training stages. The learning-rate defaults follow
/// the reference recipe (SGD, momentum 0.9, weight decay 5e-4, base LR 3e-4
/// with a 10x multiplier on heads trained from scratch, inverse decay).
struct TrainOptions {
    int epochs = 8;
    int batch_size = 32;
    double base_lr = 0.0003;
    double momentum = 0.9;
    double weight_decay = 0.0005;
    double head_lr_multiplier = 10.0;
    double unknown_lr_multiplier = 2.0;
    InverseDecaySchedule schedule;
    LossWeights weights;
    double center_alpha = 0.5;
    bool no_anchor = false;
    int encoder_first_trainable_block = 0;  // 0 trains all blocks, 4 freezes the encoder
    std::uint64_t seed = 0;

    void validate() const {
        if (epochs < 1) throw ValidationError("TrainOptions: epochs must be >= 1");
        if (batch_size < 1) throw ValidationError("TrainOptions: batch_size must be >= 1");
        if (base_lr <= 0) throw ValidationError("TrainOptions: base_lr must be > 0");
        if (momentum < 0 || momentum >= 1)
            throw ValidationError("TrainOptions: momentum must be in [0,1)");
        if (weight_decay < 0) throw ValidationError("TrainOptions: weight_decay must be >= 0");
        if (center_alpha <= 0 || center_alpha > 1)
            throw ValidationError("TrainOptions: center_alpha must be in (0,1]");
        if (encoder_first_trainable_block < 0 || encoder_first_trainable_block > 4)
            throw ValidationError("TrainOptions: encoder_first_trainable_block must be in [0,4]");
        weights.validate();
    }
};

struct Stage1EpochLog {
    int epoch = 0;
    double total = 0.0;
    double semantic_ce = 0.0;
    double rotation_ce = 0.0;
    double center = 0.0;
    double lr_scale = 1.0;
};

namespace detail {

template <typename T>
void check_finite(T loss, int epoch, int iter, const char* stage) {
    if (!std::isfinite(static_cast<double>(loss)))
        throw TrainingError(std::string(stage) + " diverged: non-finite loss at epoch " +
                            std::to_string(epoch) + ", iteration " + std::to_string(iter));
}

inline std::vector<const Image*> gather_images(const Dataset& set, const std::vector<int>& idx) {
    std::vector<const Image*> out;
    out.reserve(idx.size());
    for (int i : idx) out.push_back(&set.samples[static_cast<std::size_t>(i)].image);
    return out;
}

}  // namespace detail

/// Stage I: train encoder, C1 and R1 on the 4N quadruple expansion of the
/// source set. Quadruples are revisited in a fresh shuffled order every
/// epoch; batch order is a pure function of (seed, epoch).
template <typename T>
std::vector<Stage1EpochLog> train_stage1(NetworkBundle<T>& bundle, const Dataset& source,
                                         const TrainOptions& opt, std::ostream* log = nullptr) {
    opt.validate();
    if (source.empty()) throw ValidationError("train_stage1: source set is empty");
    if (!bundle.has_head(HeadRole::C1) || !bundle.has_head(HeadRole::R1))
        throw ValidationError("train_stage1: bundle is not a stage-one bundle");

    const int n_known = bundle.n_known();
    const int image_size = source.samples.front().image.height;
    Head<T>& c1 = bundle.head(HeadRole::C1);
    Head<T>& r1 = bundle.head(HeadRole::R1);

    bundle.encoder().set_trainable_blocks(opt.encoder_first_trainable_block);
    for (Param<T>* p : c1.params()) p->lr_mult = static_cast<T>(opt.head_lr_multiplier);
    for (Param<T>* p : r1.params()) p->lr_mult = static_cast<T>(opt.head_lr_multiplier);

    SgdOptimizer<T> optim(bundle.params(), static_cast<T>(opt.base_lr),
                          static_cast<T>(opt.momentum), static_cast<T>(opt.weight_decay));
    CentroidTable<T> centroids(4 * n_known, kHeadHiddenDim, static_cast<T>(opt.center_alpha));

    // flattened (sample, rotation) index of the 4N quadruple set
    std::vector<std::pair<int, int>> quads;
    quads.reserve(source.size() * 4);
    for (int s = 0; s < static_cast<int>(source.size()); ++s)
        for (int i = 0; i < 4; ++i) quads.emplace_back(s, i);

    const long iters_per_epoch =
        (static_cast<long>(quads.size()) + opt.batch_size - 1) / opt.batch_size;
    const long total_iters = iters_per_epoch * opt.epochs;
    long global_iter = 0;

    std::vector<Stage1EpochLog> logs;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        Rng shuffle_rng(derive_seed({opt.seed, 0x57A9E1u, static_cast<std::uint64_t>(epoch)}));
        shuffle_rng.shuffle(quads);

        Stage1EpochLog elog;
        elog.epoch = epoch;
        for (long it = 0; it < iters_per_epoch; ++it) {
            const std::size_t begin = static_cast<std::size_t>(it) * opt.batch_size;
            const std::size_t end = std::min(begin + opt.batch_size, quads.size());
            const int bsz = static_cast<int>(end - begin);

            std::vector<const Image*> anchors;
            std::vector<Image> rotated_store;
            std::vector<int> y_labels, z_labels;
            anchors.reserve(bsz);
            rotated_store.reserve(bsz);
            for (std::size_t q = begin; q < end; ++q) {
                const auto& [sidx, rot] = quads[q];
                const Sample& smp = source.samples[static_cast<std::size_t>(sidx)];
                anchors.push_back(&smp.image);
                rotated_store.push_back(rot90(smp.image, rot));
                y_labels.push_back(smp.class_label);
                z_labels.push_back(make_multi_rotation_label(smp.class_label, rot, n_known));
            }
            std::vector<const Image*> rotated;
            rotated.reserve(rotated_store.size());
            for (const Image& im : rotated_store) rotated.push_back(&im);

            typename Encoder<T>::Ctx enc_anc_ctx, enc_rot_ctx;
            Mat<T> anc_feats = bundle.encoder().forward(NetworkBundle<T>::pack_images(anchors),
                                                        image_size, true, &enc_anc_ctx);
            Mat<T> rot_feats = bundle.encoder().forward(NetworkBundle<T>::pack_images(rotated),
                                                        image_size, true, &enc_rot_ctx);

            typename Head<T>::Ctx c1_ctx, r1_ctx;
            Mat<T> sem_logits = c1.forward(anc_feats, true, &c1_ctx);
            Mat<T> sem_probs = softmax(sem_logits);

            Mat<T> joint(rot_feats.rows(), 2 * rot_feats.cols());
            if (opt.no_anchor)
                joint << rot_feats, rot_feats;
            else
                joint << anc_feats, rot_feats;
            Mat<T> rot_logits = r1.forward(joint, true, &r1_ctx);
            Mat<T> rot_probs = softmax(rot_logits);

            // center gradient uses the same pre-update centroids as the loss
            Mat<T> dv_center;
            if (opt.weights.lambda_1_2 > 0)
                dv_center = static_cast<T>(opt.weights.lambda_1_2) *
                            centroids.grad(r1_ctx.penultimate, z_labels, Reduction::mean);
            auto bd = stage1_objective(sem_probs, y_labels, rot_probs, z_labels,
                                       r1_ctx.penultimate, centroids, opt.weights,
                                       Reduction::mean);
            detail::check_finite(bd.total, epoch, static_cast<int>(it), "stage1");
            elog.total += bd.total;
            elog.semantic_ce += bd.semantic_ce;
            elog.rotation_ce += bd.rotation_ce;
            elog.center += bd.center;

            optim.zero_grad();
            Mat<T> dsem = softmax_cross_entropy_backward(
                sem_probs, one_hot<T>(y_labels, sem_probs.cols()), Reduction::mean);
            Mat<T> danc = c1.backward(c1_ctx, dsem);

            Mat<T> drot_logits =
                static_cast<T>(opt.weights.lambda_1_1) *
                softmax_cross_entropy_backward(rot_probs, one_hot<T>(z_labels, rot_probs.cols()),
                                               Reduction::mean);
            Mat<T> djoint = r1.backward(r1_ctx, drot_logits, dv_center);
            Mat<T> drot = djoint.rightCols(rot_feats.cols());
            if (opt.no_anchor)
                drot += djoint.leftCols(rot_feats.cols());
            else
                danc += djoint.leftCols(rot_feats.cols());

            bundle.encoder().backward(enc_anc_ctx, danc);
            bundle.encoder().backward(enc_rot_ctx, drot);

            double progress = static_cast<double>(global_iter) / static_cast<double>(total_iters);
            elog.lr_scale = opt.schedule.scale(progress);
            optim.step(elog.lr_scale);
            ++global_iter;
        }
        elog.total /= static_cast<double>(iters_per_epoch);
        elog.semantic_ce /= static_cast<double>(iters_per_epoch);
        elog.rotation_ce /= static_cast<double>(iters_per_epoch);
        elog.center /= static_cast<double>(iters_per_epoch);
        logs.push_back(elog);
        if (log)
            *log << "stage1 epoch " << epoch << " total=" << elog.total
                 << " semantic_ce=" << elog.semantic_ce << " rotation_ce=" << elog.rotation_ce
                 << " center=" << elog.center << " lr_scale=" << elog.lr_scale << "\n";
    }
    return logs;
}

// ---------------------------------------------------------------------------
// Normality score and known/unknown separation
// ---------------------------------------------------------------------------

enum class ScoreMode {
    full,          // max(rotation score, entropy score)
    rotation_only, // "no entropy score" ablation
    entropy_only,  // "no rotation score" ablation
};

struct NormalityRecord {
    int sample_id = -1;
    double rotation_score = 0.0;
    double entropy_score = 0.0;
    double normality = 0.0;
    Mat<double> z_rows;  // 4 x (4*n_known) per-rotation prediction vectors
};

/// Rotation consistency: (1/4) * max_k sum_i z_i[4k+i] over the four
/// relative-rotation predictions.
inline double rotation_score(const Mat<double>& z_rows) {
    if (z_rows.rows() != 4 || z_rows.cols() % 4 != 0 || z_rows.cols() < 4)
        throw ShapeError("rotation_score: expected 4 rows of width 4*|Cs|");
    const int n_known = static_cast<int>(z_rows.cols() / 4);
    double best = 0.0;
    for (int k = 0; k < n_known; ++k) {
        double s = 0.0;
        for (int i = 0; i < 4; ++i) s += z_rows(i, 4 * k + i);
        best = std::max(best, s);
    }
    return best / 4.0;
}

/// Confidence: 1 - mean normalized entropy of the four predictions, with
/// H(p) = -sum p log p / log(4*|Cs|) in [0,1].
inline double entropy_score(const Mat<double>& z_rows) {
    if (z_rows.rows() != 4 || z_rows.cols() % 4 != 0 || z_rows.cols() < 4)
        throw ShapeError("entropy_score: expected 4 rows of width 4*|Cs|");
    const double norm = std::log(static_cast<double>(z_rows.cols()));
    double mean_h = 0.0;
    for (int i = 0; i < 4; ++i) {
        double h = 0.0;
        for (Eigen::Index c = 0; c < z_rows.cols(); ++c) {
            double p = z_rows(i, c);
            if (p > 0.0) h -= p * std::log(std::max(p, 1e-12));
        }
        mean_h += h / norm;
    }
    return 1.0 - mean_h / 4.0;
}

inline double normality_from_components(double rot, double ent, ScoreMode mode) {
    switch (mode) {
        case ScoreMode::rotation_only: return rot;
        case ScoreMode::entropy_only: return ent;
        default: return std::max(rot, ent);
    }
}

/// Score every target sample with the stage-one bundle in evaluation mode:
/// four relative-rotation predictions per sample, then the normality score.
template <typename T>
std::vector<NormalityRecord> compute_normality_scores(NetworkBundle<T>& bundle,
                                                      const Dataset& target,
                                                      ScoreMode mode = ScoreMode::full,
                                                      bool use_anchor = true,
                                                      int batch_size = 64) {
    if (!bundle.has_head(HeadRole::R1))
        throw ValidationError("compute_normality_scores: bundle lacks R1");
    Head<T>& r1 = bundle.head(HeadRole::R1);
    const int f = bundle.encoder().feature_dim();

    std::vector<NormalityRecord> records;
    records.reserve(target.size());
    const int n = static_cast<int>(target.size());
    for (int begin = 0; begin < n; begin += batch_size) {
        const int bsz = std::min(batch_size, n - begin);
        std::vector<const Image*> anchors;
        anchors.reserve(static_cast<std::size_t>(bsz));
        for (int s = 0; s < bsz; ++s)
            anchors.push_back(&target.samples[static_cast<std::size_t>(begin + s)].image);
        const int image_size = anchors[0]->height;

        Mat<T> anc_feats = bundle.encoder().forward(NetworkBundle<T>::pack_images(anchors),
                                                    image_size, false, nullptr);
        std::vector<Image> rotated_store;
        rotated_store.reserve(static_cast<std::size_t>(bsz) * 4);
        for (int s = 0; s < bsz; ++s)
            for (int i = 0; i < 4; ++i) rotated_store.push_back(rot90(*anchors[s], i));
        std::vector<const Image*> rotated;
        for (const Image& im : rotated_store) rotated.push_back(&im);
        Mat<T> rot_feats = bundle.encoder().forward(NetworkBundle<T>::pack_images(rotated),
                                                    image_size, false, nullptr);

        Mat<T> joint(rot_feats.rows(), 2 * f);
        for (int s = 0; s < bsz; ++s)
            for (int i = 0; i < 4; ++i) {
                Eigen::Index row = static_cast<Eigen::Index>(s) * 4 + i;
                joint.row(row).leftCols(f) = use_anchor ? anc_feats.row(s) : rot_feats.row(row);
                joint.row(row).rightCols(f) = rot_feats.row(row);
            }
        Mat<T> probs = softmax<T>(r1.forward(joint, false, nullptr));

        for (int s = 0; s < bsz; ++s) {
            NormalityRecord rec;
            rec.sample_id = target.samples[static_cast<std::size_t>(begin + s)].sample_id;
            rec.z_rows = probs.middleRows(static_cast<Eigen::Index>(s) * 4, 4).template cast<double>();
            rec.rotation_score = rotation_score(rec.z_rows);
            rec.entropy_score = entropy_score(rec.z_rows);
            rec.normality = normality_from_components(rec.rotation_score, rec.entropy_score, mode);
            records.push_back(std::move(rec));
        }
    }
    return records;
}

struct SeparationResult {
    double threshold = 0.0;
    std::vector<int> knw_ids;
    std::vector<int> unk_ids;
    std::vector<NormalityRecord> records;
};

/// Threshold at the mean normality score; samples scoring >= the mean are
/// assigned to the known partition (ties go to known).
inline SeparationResult separate_target(std::vector<NormalityRecord> records) {
    if (records.empty()) throw DomainError("separate_target: no records");
    SeparationResult out;
    double sum = 0.0;
    for (const NormalityRecord& r : records) sum += r.normality;
    out.threshold = sum / static_cast<double>(records.size());
    for (const NormalityRecord& r : records) {
        if (r.normality >= out.threshold)
            out.knw_ids.push_back(r.sample_id);
        else
            out.unk_ids.push_back(r.sample_id);
    }
    out.records = std::move(records);
    return out;
}

// ---------------------------------------------------------------------------
// Persistence: scores table and separation file
// ---------------------------------------------------------------------------

inline void write_scores_csv(const SeparationResult& sep, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "sample_id,rotation_score,entropy_score,normality,assigned_partition\n";
    out << std::fixed << std::setprecision(6);
    for (const NormalityRecord& r : sep.records) {
        bool known = r.normality >= sep.threshold;
        out << r.sample_id << ',' << r.rotation_score << ',' << r.entropy_score << ','
            << r.normality << ',' << (known ? "knw" : "unk") << '\n';
    }
    if (!out) throw IoError("short write on " + path);
}

inline void write_separation_json(const SeparationResult& sep, const std::string& path) {
    nlohmann::json j;
    j["threshold"] = sep.threshold;
    j["knw_ids"] = sep.knw_ids;
    j["unk_ids"] = sep.unk_ids;
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << j.dump(2) << '\n';
}

inline SeparationResult read_separation_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("separation file: ") + e.what(), 0);
    }
    SeparationResult out;
    out.threshold = j.at("threshold").get<double>();
    out.knw_ids = j.at("knw_ids").get<std::vector<int>>();
    out.unk_ids = j.at("unk_ids").get<std::vector<int>>();
    return out;
}

}  // namespace ros
