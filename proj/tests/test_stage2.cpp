#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ros/harness.hpp"
#include "ros/stage2.hpp"

namespace fs = std::filesystem;
using namespace ros;

namespace {

SyntheticDataset tiny_task() {
    SyntheticSpec spec;
    spec.n_known = 2;
    spec.n_unknown = 2;
    spec.image_size = 16;
    spec.samples_per_class = 8;
    spec.seed = 3;
    return generate_synthetic(spec);
}

SeparationResult fake_separation(const Dataset& target, int n_known) {
    // split by ground truth, which a real run would only approximate
    SeparationResult sep;
    for (const Sample& s : target.samples)
        (s.class_label < n_known ? sep.knw_ids : sep.unk_ids).push_back(s.sample_id);
    sep.threshold = 0.5;
    return sep;
}

TrainOptions tiny_options(std::uint64_t seed) {
    TrainOptions opt;
    opt.epochs = 2;
    opt.batch_size = 8;
    opt.base_lr = 0.001;
    opt.seed = seed;
    return opt;
}

EncoderSpec tiny_encoder() {
    EncoderSpec spec;
    spec.widths = {4, 4, 8, 16};
    return spec;
}

}  // namespace

TEST(StreamPlan, IterationCountCoversLargestStream) {
    StreamBatchPlan p = make_stream_plan(100, 37, 63, 32);
    EXPECT_EQ(p.source_batch, 32);
    EXPECT_EQ(p.unk_batch, 32);
    EXPECT_EQ(p.knw_batch, 32);
    EXPECT_EQ(p.iterations, 4);  // ceil(100/32)

    StreamBatchPlan small = make_stream_plan(5, 0, 3, 32);
    EXPECT_EQ(small.source_batch, 5);
    EXPECT_EQ(small.unk_batch, 0);
    EXPECT_EQ(small.knw_batch, 3);
    EXPECT_EQ(small.iterations, 1);

    EXPECT_THROW(make_stream_plan(1, 1, 1, 0), ValidationError);
}

TEST(Stage2Training, RunsAndDegeneratesToSourceOnly) {
    SyntheticDataset d = tiny_task();
    auto bundle = NetworkBundle<float>::make_stage2(tiny_encoder(), 2, 5);
    SeparationResult sep = fake_separation(d.target, 2);

    std::ostringstream log;
    auto logs = train_stage2(bundle, d.source, d.target, sep, tiny_options(1), &log);
    ASSERT_EQ(logs.size(), 2u);
    for (const auto& l : logs) {
        EXPECT_TRUE(std::isfinite(l.total));
        EXPECT_GT(l.rotation_ce, 0.0);
    }

    // empty partitions: degenerate warning and pure source training
    auto bundle2 = NetworkBundle<float>::make_stage2(tiny_encoder(), 2, 5);
    std::ostringstream log2;
    TrainOptions opt = tiny_options(1);
    opt.weights.lambda_2_1 = 0.0;
    opt.weights.lambda_2_2 = 0.0;
    auto logs2 = train_stage2(bundle2, d.source, d.target, SeparationResult{}, opt, &log2);
    EXPECT_NE(log2.str().find("source only"), std::string::npos);
    for (const auto& l : logs2) {
        EXPECT_DOUBLE_EQ(l.entropy, 0.0);
        EXPECT_DOUBLE_EQ(l.rotation_ce, 0.0);
        EXPECT_GT(l.supervised_ce, 0.0);
    }
}

TEST(Stage2Training, NeverReadsTargetGroundTruth) {
    SyntheticDataset d = tiny_task();
    SeparationResult sep = fake_separation(d.target, 2);
    TrainOptions opt = tiny_options(9);

    auto train_once = [&](const Dataset& target) {
        auto b1 = NetworkBundle<float>::make_stage1(tiny_encoder(), 2, 17);
        auto b2 = transfer_stage1_to_stage2(b1, 17, 2.0f);
        train_stage2(b2, d.source, target, sep, opt);
        fs::path p = fs::temp_directory_path() / "ros_leak_check.ckpt";
        save_checkpoint(b2, p.string(), "x");
        std::ifstream f(p.string(), std::ios::binary);
        return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    };

    std::string bytes_clean = train_once(d.target);
    Dataset scrambled = d.target;
    for (Sample& s : scrambled.samples) s.class_label = 3 - s.class_label;
    std::string bytes_scrambled = train_once(scrambled);
    EXPECT_EQ(bytes_clean, bytes_scrambled);
    fs::remove(fs::temp_directory_path() / "ros_leak_check.ckpt");
}

TEST(Stage2Training, NoAnchorPathAndMissingIdValidation) {
    SyntheticDataset d = tiny_task();
    auto bundle = NetworkBundle<float>::make_stage2(tiny_encoder(), 2, 5);
    SeparationResult sep = fake_separation(d.target, 2);
    TrainOptions opt = tiny_options(2);
    opt.no_anchor = true;
    EXPECT_NO_THROW(train_stage2(bundle, d.source, d.target, sep, opt));

    SeparationResult bad = sep;
    bad.unk_ids.push_back(99999);
    auto bundle2 = NetworkBundle<float>::make_stage2(tiny_encoder(), 2, 5);
    EXPECT_THROW(train_stage2(bundle2, d.source, d.target, bad, opt), ValidationError);
}

TEST(Predict, ArgmaxCoverageAndIdempotence) {
    SyntheticDataset d = tiny_task();
    auto bundle = NetworkBundle<float>::make_stage2(tiny_encoder(), 2, 5);
    auto preds1 = predict(bundle, d.target);
    auto preds2 = predict(bundle, d.target);
    ASSERT_EQ(preds1.size(), d.target.size());

    std::vector<int> ids;
    for (std::size_t i = 0; i < preds1.size(); ++i) {
        EXPECT_EQ(preds1[i].predicted_label, preds2[i].predicted_label);
        EXPECT_DOUBLE_EQ(preds1[i].max_confidence, preds2[i].max_confidence);
        EXPECT_GE(preds1[i].predicted_label, 0);
        EXPECT_LE(preds1[i].predicted_label, 2);  // n_known == 2 plus unknown
        ids.push_back(preds1[i].sample_id);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    EXPECT_EQ(ids.size(), d.target.size());
}

TEST(PredictionsCsv, RoundTrip) {
    std::vector<Prediction> preds;
    for (int i = 0; i < 7; ++i) {
        Prediction p;
        p.sample_id = i;
        p.predicted_label = i % 3;
        p.ground_truth = i % 4;
        p.max_confidence = 0.25 * (i % 4);
        preds.push_back(p);
    }
    fs::path dir = fs::temp_directory_path() / "ros_pred_test";
    fs::create_directories(dir);
    std::string path = (dir / "predictions.csv").string();
    write_predictions_csv(preds, path);
    auto loaded = read_predictions_csv(path);
    ASSERT_EQ(loaded.size(), preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) {
        EXPECT_EQ(loaded[i].sample_id, preds[i].sample_id);
        EXPECT_EQ(loaded[i].predicted_label, preds[i].predicted_label);
        EXPECT_EQ(loaded[i].ground_truth, preds[i].ground_truth);
        EXPECT_NEAR(loaded[i].max_confidence, preds[i].max_confidence, 1e-6);
    }
    fs::remove_all(dir);
}
