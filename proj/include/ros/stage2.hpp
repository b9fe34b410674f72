#pragma once

#include <fstream>
#include <iomanip>
#include <ostream>
#include <string>
#include <unordered_map>
#include <vector>

#include "ros/metrics.hpp"
#include "ros/stage1.hpp"

namespace ros {

/// Per-iteration draw sizes for the (source, unknown, known) streams.
/// Iterations per epoch cover the largest stream once; smaller streams
/// cycle with a reshuffle on wrap.
struct StreamBatchPlan {
    int source_batch = 0;
    int unk_batch = 0;
    int knw_batch = 0;
    long iterations = 0;
};

inline StreamBatchPlan make_stream_plan(long n_source, long n_unk, long n_knw, int batch_size) {
    if (batch_size < 1) throw ValidationError("make_stream_plan: batch_size must be >= 1");
    StreamBatchPlan plan;
    plan.source_batch = n_source > 0 ? static_cast<int>(std::min<long>(batch_size, n_source)) : 0;
    plan.unk_batch = n_unk > 0 ? static_cast<int>(std::min<long>(batch_size, n_unk)) : 0;
    plan.knw_batch = n_knw > 0 ? static_cast<int>(std::min<long>(batch_size, n_knw)) : 0;
    long largest = std::max(n_source, std::max(n_unk, n_knw));
    plan.iterations = largest > 0 ? (largest + batch_size - 1) / batch_size : 0;
    return plan;
}

namespace detail {

/// Shuffled, wrapping index stream; reshuffles deterministically on wrap.
class IndexStream {
public:
    IndexStream() = default;
    IndexStream(std::vector<int> indices, std::uint64_t seed, std::uint64_t tag)
        : indices_(std::move(indices)), seed_(seed), tag_(tag) {
        reshuffle();
    }

    bool empty() const { return indices_.empty(); }

    std::vector<int> next(int count) {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(count));
        while (static_cast<int>(out.size()) < count && !indices_.empty()) {
            if (cursor_ >= indices_.size()) reshuffle();
            out.push_back(indices_[cursor_++]);
        }
        return out;
    }

private:
    void reshuffle() {
        Rng rng(derive_seed({seed_, tag_, wraps_}));
        rng.shuffle(indices_);
        cursor_ = 0;
        ++wraps_;
    }

    std::vector<int> indices_;
    std::size_t cursor_ = 0;
    std::uint64_t seed_ = 0;
    std::uint64_t tag_ = 0;
    std::uint64_t wraps_ = 0;
};

}  // namespace detail

struct Stage2EpochLog {
    int epoch = 0;
    double total = 0.0;
    double supervised_ce = 0.0;
    double entropy = 0.0;
    double rotation_ce = 0.0;
    double lr_scale = 1.0;
};

/// Stage II: train encoder, C2 and R2. Source and predicted-unknown samples
/// feed the (n_known+1)-way cross-entropy, predicted-known samples feed the
/// entropy term and the relative-rotation task with one random rotation per
/// sample per iteration. Target ground-truth labels are never read.
template <typename T>
std::vector<Stage2EpochLog> train_stage2(NetworkBundle<T>& bundle, const Dataset& source,
                                         const Dataset& target, const SeparationResult& separation,
                                         const TrainOptions& opt, std::ostream* log = nullptr) {
    opt.validate();
    if (!bundle.has_head(HeadRole::C2) || !bundle.has_head(HeadRole::R2))
        throw ValidationError("train_stage2: bundle is not a stage-two bundle");
    if (source.empty()) throw ValidationError("train_stage2: source set is empty");

    const int n_known = bundle.n_known();
    const int image_size = source.samples.front().image.height;
    Head<T>& c2 = bundle.head(HeadRole::C2);
    Head<T>& r2 = bundle.head(HeadRole::R2);

    bundle.encoder().set_trainable_blocks(opt.encoder_first_trainable_block);
    for (Param<T>* p : c2.params()) p->lr_mult = static_cast<T>(opt.head_lr_multiplier);
    for (Param<T>* p : r2.params()) p->lr_mult = static_cast<T>(opt.head_lr_multiplier);

    SgdOptimizer<T> optim(bundle.params(), static_cast<T>(opt.base_lr),
                          static_cast<T>(opt.momentum), static_cast<T>(opt.weight_decay));

    std::unordered_map<int, int> id_to_index;
    for (int i = 0; i < static_cast<int>(target.size()); ++i)
        id_to_index[target.samples[static_cast<std::size_t>(i)].sample_id] = i;
    auto resolve = [&](const std::vector<int>& ids) {
        std::vector<int> out;
        out.reserve(ids.size());
        for (int id : ids) {
            auto it = id_to_index.find(id);
            if (it == id_to_index.end())
                throw ValidationError("train_stage2: separation id " + std::to_string(id) +
                                      " not present in target set");
            out.push_back(it->second);
        }
        return out;
    };
    std::vector<int> unk_indices = resolve(separation.unk_ids);
    std::vector<int> knw_indices = resolve(separation.knw_ids);

    if (unk_indices.empty() && knw_indices.empty() && log)
        *log << "stage2 warning: empty target partitions, training on source only\n";

    std::vector<int> source_indices(source.size());
    for (int i = 0; i < static_cast<int>(source.size()); ++i) source_indices[i] = i;

    StreamBatchPlan plan =
        make_stream_plan(static_cast<long>(source_indices.size()),
                         static_cast<long>(unk_indices.size()),
                         static_cast<long>(knw_indices.size()), opt.batch_size);
    const long total_iters = plan.iterations * opt.epochs;
    long global_iter = 0;

    std::vector<Stage2EpochLog> logs;
    for (int epoch = 0; epoch < opt.epochs; ++epoch) {
        detail::IndexStream src_stream(source_indices,
                                       derive_seed({opt.seed, 0x52Bu, static_cast<std::uint64_t>(epoch)}), 1);
        detail::IndexStream unk_stream(unk_indices,
                                       derive_seed({opt.seed, 0x52Bu, static_cast<std::uint64_t>(epoch)}), 2);
        detail::IndexStream knw_stream(knw_indices,
                                       derive_seed({opt.seed, 0x52Bu, static_cast<std::uint64_t>(epoch)}), 3);
        Rng rot_rng(derive_seed({opt.seed, 0x52BB07u, static_cast<std::uint64_t>(epoch)}));

        Stage2EpochLog elog;
        elog.epoch = epoch;
        for (long it = 0; it < plan.iterations; ++it) {
            std::vector<int> src_idx = src_stream.next(plan.source_batch);
            std::vector<int> unk_idx = unk_stream.next(plan.unk_batch);
            std::vector<int> knw_idx = knw_stream.next(plan.knw_batch);
            const int n_src = static_cast<int>(src_idx.size());
            const int n_unk = static_cast<int>(unk_idx.size());
            const int n_knw = static_cast<int>(knw_idx.size());

            // one combined encoder pass over [source ; unknown ; known]
            std::vector<const Image*> combined;
            std::vector<int> src_labels;
            combined.reserve(static_cast<std::size_t>(n_src + n_unk + n_knw));
            for (int i : src_idx) {
                combined.push_back(&source.samples[static_cast<std::size_t>(i)].image);
                src_labels.push_back(source.samples[static_cast<std::size_t>(i)].class_label);
            }
            for (int i : unk_idx) combined.push_back(&target.samples[static_cast<std::size_t>(i)].image);
            for (int i : knw_idx) combined.push_back(&target.samples[static_cast<std::size_t>(i)].image);

            typename Encoder<T>::Ctx enc_ctx;
            Mat<T> feats = bundle.encoder().forward(NetworkBundle<T>::pack_images(combined),
                                                    image_size, true, &enc_ctx);

            typename Head<T>::Ctx c2_ctx;
            Mat<T> c2_logits = c2.forward(feats, true, &c2_ctx);
            Mat<T> c2_probs = softmax(c2_logits);
            Mat<T> src_probs = c2_probs.topRows(n_src);
            Mat<T> unk_probs = c2_probs.middleRows(n_src, n_unk);
            Mat<T> knw_probs = c2_probs.bottomRows(n_knw);

            // relative rotation on the predicted-known stream
            std::vector<Image> rotated_store;
            std::vector<int> rot_labels;
            rotated_store.reserve(static_cast<std::size_t>(n_knw));
            for (int s = 0; s < n_knw; ++s) {
                int rot = static_cast<int>(rot_rng.next_below(4));
                rot_labels.push_back(rot);
                rotated_store.push_back(
                    rot90(target.samples[static_cast<std::size_t>(knw_idx[static_cast<std::size_t>(s)])].image,
                          rot));
            }
            typename Encoder<T>::Ctx enc_rot_ctx;
            typename Head<T>::Ctx r2_ctx;
            Mat<T> rot_probs;
            Mat<T> rot_feats;
            if (n_knw > 0) {
                std::vector<const Image*> rotated;
                for (const Image& im : rotated_store) rotated.push_back(&im);
                rot_feats = bundle.encoder().forward(NetworkBundle<T>::pack_images(rotated),
                                                     image_size, true, &enc_rot_ctx);
                Mat<T> knw_feats = feats.bottomRows(n_knw);
                Mat<T> joint(n_knw, 2 * rot_feats.cols());
                if (opt.no_anchor)
                    joint << rot_feats, rot_feats;
                else
                    joint << knw_feats, rot_feats;
                rot_probs = softmax<T>(r2.forward(joint, true, &r2_ctx));
            }

            auto bd = stage2_objective(src_probs, src_labels, unk_probs, knw_probs, rot_probs,
                                       rot_labels, opt.weights, Reduction::mean);
            detail::check_finite(bd.total, epoch, static_cast<int>(it), "stage2");
            elog.total += bd.total;
            elog.supervised_ce += bd.supervised_ce;
            elog.entropy += bd.entropy;
            elog.rotation_ce += bd.rotation_ce;

            optim.zero_grad();

            // C2 gradient: supervised rows share one mean, entropy rows another
            Mat<T> dlogits = Mat<T>::Zero(c2_probs.rows(), c2_probs.cols());
            const int n_sup = n_src + n_unk;
            if (n_sup > 0) {
                Mat<T> sup_targets = Mat<T>::Zero(n_sup, c2_probs.cols());
                for (int s = 0; s < n_src; ++s) sup_targets(s, src_labels[static_cast<std::size_t>(s)]) = T(1);
                for (int s = 0; s < n_unk; ++s) sup_targets(n_src + s, n_known) = T(1);
                Mat<T> sup_probs = c2_probs.topRows(n_sup);
                dlogits.topRows(n_sup) =
                    softmax_cross_entropy_backward(sup_probs, sup_targets, Reduction::mean);
            }
            if (n_knw > 0)
                dlogits.bottomRows(n_knw) =
                    static_cast<T>(opt.weights.lambda_2_1) *
                    entropy_softmax_backward(knw_probs, Reduction::mean);
            Mat<T> dfeats = c2.backward(c2_ctx, dlogits);

            if (n_knw > 0 && opt.weights.lambda_2_2 >= 0) {
                Mat<T> drot_logits =
                    static_cast<T>(opt.weights.lambda_2_2) *
                    softmax_cross_entropy_backward(rot_probs, one_hot<T>(rot_labels, 4),
                                                   Reduction::mean);
                Mat<T> djoint = r2.backward(r2_ctx, drot_logits);
                Mat<T> drot = djoint.rightCols(rot_feats.cols());
                if (opt.no_anchor)
                    drot += djoint.leftCols(rot_feats.cols());
                else
                    dfeats.bottomRows(n_knw) += djoint.leftCols(rot_feats.cols());
                bundle.encoder().backward(enc_rot_ctx, drot);
            }
            bundle.encoder().backward(enc_ctx, dfeats);

            double progress = static_cast<double>(global_iter) / static_cast<double>(total_iters);
            elog.lr_scale = opt.schedule.scale(progress);
            optim.step(elog.lr_scale);
            ++global_iter;
        }
        if (plan.iterations > 0) {
            elog.total /= static_cast<double>(plan.iterations);
            elog.supervised_ce /= static_cast<double>(plan.iterations);
            elog.entropy /= static_cast<double>(plan.iterations);
            elog.rotation_ce /= static_cast<double>(plan.iterations);
        }
        logs.push_back(elog);
        if (log)
            *log << "stage2 epoch " << epoch << " total=" << elog.total
                 << " supervised_ce=" << elog.supervised_ce << " entropy=" << elog.entropy
                 << " rotation_ce=" << elog.rotation_ce << " lr_scale=" << elog.lr_scale << "\n";
    }
    return logs;
}

/// Final (n_known+1)-way predictions over the target, deterministic with
/// the weights frozen; R2 plays no part here.
template <typename T>
std::vector<Prediction> predict(NetworkBundle<T>& bundle, const Dataset& target,
                                int batch_size = 128) {
    if (!bundle.has_head(HeadRole::C2)) throw ValidationError("predict: bundle lacks C2");
    std::vector<Prediction> out;
    out.reserve(target.size());
    const int n = static_cast<int>(target.size());
    for (int begin = 0; begin < n; begin += batch_size) {
        const int bsz = std::min(batch_size, n - begin);
        std::vector<const Image*> images;
        images.reserve(static_cast<std::size_t>(bsz));
        for (int s = 0; s < bsz; ++s)
            images.push_back(&target.samples[static_cast<std::size_t>(begin + s)].image);
        SemanticOutput<T> so = bundle.forward_semantic(images, HeadRole::C2);
        for (int s = 0; s < bsz; ++s) {
            const Sample& smp = target.samples[static_cast<std::size_t>(begin + s)];
            Prediction p;
            p.sample_id = smp.sample_id;
            Eigen::Index arg = 0;
            so.probs.row(s).maxCoeff(&arg);
            p.predicted_label = static_cast<int>(arg);
            p.ground_truth = smp.class_label;
            p.max_confidence = static_cast<double>(so.probs(s, arg));
            out.push_back(p);
        }
    }
    return out;
}

inline void write_predictions_csv(const std::vector<Prediction>& preds, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "sample_id,predicted_label,ground_truth,max_confidence\n";
    out << std::fixed << std::setprecision(6);
    for (const Prediction& p : preds)
        out << p.sample_id << ',' << p.predicted_label << ',' << p.ground_truth << ','
            << p.max_confidence << '\n';
    if (!out) throw IoError("short write on " + path);
}

}  // namespace ros
