#include <gtest/gtest.h>

#include <cmath>

#include "ros/losses.hpp"
#include "ros/rng.hpp"

using namespace ros;
using Md = Mat<double>;

namespace {

Md random_prob_rows(int rows, int cols, Rng& rng) {
    Md p(rows, cols);
    for (int r = 0; r < rows; ++r) {
        double sum = 0.0;
        for (int c = 0; c < cols; ++c) {
            p(r, c) = 0.05 + rng.uniform();
            sum += p(r, c);
        }
        p.row(r) /= sum;
    }
    return p;
}

/// Central finite differences of a scalar functional over a matrix input.
template <typename F>
Md finite_difference(const Md& x, F f, double step = 1e-5) {
    Md g(x.rows(), x.cols());
    Md probe = x;
    for (Eigen::Index r = 0; r < x.rows(); ++r)
        for (Eigen::Index c = 0; c < x.cols(); ++c) {
            probe(r, c) = x(r, c) + step;
            double up = f(probe);
            probe(r, c) = x(r, c) - step;
            double down = f(probe);
            probe(r, c) = x(r, c);
            g(r, c) = (up - down) / (2.0 * step);
        }
    return g;
}

double max_rel_error(const Md& analytic, const Md& numeric) {
    double worst = 0.0;
    for (Eigen::Index r = 0; r < analytic.rows(); ++r)
        for (Eigen::Index c = 0; c < analytic.cols(); ++c) {
            double denom = std::max({std::abs(analytic(r, c)), std::abs(numeric(r, c)), 1e-8});
            worst = std::max(worst, std::abs(analytic(r, c) - numeric(r, c)) / denom);
        }
    return worst;
}

}  // namespace

TEST(CrossEntropy, ClosedForms) {
    Md perfect(2, 3);
    perfect << 1, 0, 0, 0, 0, 1;
    EXPECT_NEAR(cross_entropy(perfect, perfect, Reduction::sum), 0.0, 1e-9);

    Md uniform = Md::Constant(2, 4, 0.25);
    Md y = Md::Zero(2, 4);
    y(0, 1) = 1;
    y(1, 3) = 1;
    EXPECT_NEAR(cross_entropy(uniform, y, Reduction::sum), 2.0 * std::log(4.0), 1e-12);
    EXPECT_NEAR(cross_entropy(uniform, y, Reduction::mean), std::log(4.0), 1e-12);

    // additivity across rows in sum mode
    Rng rng(11);
    Md p = random_prob_rows(2, 5, rng);
    Md t = Md::Zero(2, 5);
    t(0, 2) = 1;
    t(1, 0) = 1;
    double both = cross_entropy(p, t, Reduction::sum);
    double first = cross_entropy(Md(p.topRows(1)), Md(t.topRows(1)), Reduction::sum);
    double second = cross_entropy(Md(p.bottomRows(1)), Md(t.bottomRows(1)), Reduction::sum);
    EXPECT_NEAR(both, first + second, 1e-12);

    EXPECT_THROW(cross_entropy(p, Md(t.leftCols(4))), ShapeError);
}

TEST(EntropyLoss, ClosedForms) {
    Md onehot(1, 6);
    onehot << 0, 0, 1, 0, 0, 0;
    EXPECT_NEAR(entropy_loss(onehot, Reduction::sum), 0.0, 1e-12);
    Md uniform = Md::Constant(1, 8, 0.125);
    EXPECT_NEAR(entropy_loss(uniform, Reduction::sum), std::log(8.0), 1e-12);

    Rng rng(12);
    Md p = random_prob_rows(1, 6, rng);
    Md shuffled = p;
    std::swap(shuffled(0, 0), shuffled(0, 5));
    std::swap(shuffled(0, 1), shuffled(0, 3));
    EXPECT_NEAR(entropy_loss(p), entropy_loss(shuffled), 1e-12);
}

TEST(CenterLoss, ClosedForms) {
    CentroidTable<double> table(4, 8, 0.5);
    Md v = Md::Zero(1, 8);
    EXPECT_NEAR(table.loss(v, {2}), 0.0, 1e-12);

    v(0, 0) = 1.0;
    EXPECT_NEAR(table.loss(v, {0}), 1.0, 1e-12);

    // two samples of one class symmetric around the centroid
    Md pair = Md::Zero(2, 8);
    pair(0, 3) = 0.7;
    pair(1, 3) = -0.7;
    EXPECT_NEAR(table.loss(pair, {1, 1}), 2.0 * 0.49, 1e-12);

    EXPECT_THROW(table.loss(v, {4}), DomainError);
    EXPECT_THROW(table.loss(v, {0, 1}), ShapeError);
}

TEST(CenterLoss, UpdateRule) {
    CentroidTable<double> table(2, 4, 0.5);
    Md v(2, 4);
    v << 1, 0, 0, 0, 3, 0, 0, 0;  // both class 0, mean (2,0,0,0)
    table.update(v, {0, 0});
    EXPECT_NEAR(table.centroids()(0, 0), 1.0, 1e-12);  // 0 - 0.5*(0-2)
    EXPECT_NEAR(table.centroids()(1, 0), 0.0, 1e-12);  // untouched class
}

TEST(Gradients, MatchCentralFiniteDifferences) {
    Rng rng(77);
    for (int trial = 0; trial < 5; ++trial) {
        Md p = random_prob_rows(16, 8, rng);
        Md t = Md::Zero(16, 8);
        for (int r = 0; r < 16; ++r) t(r, static_cast<int>(rng.next_below(8))) = 1.0;

        Md g_ce = cross_entropy_grad(p, t, Reduction::sum);
        Md fd_ce = finite_difference(
            p, [&](const Md& x) { return cross_entropy(x, t, Reduction::sum); });
        EXPECT_LT(max_rel_error(g_ce, fd_ce), 1e-4);

        Md g_ent = entropy_loss_grad(p, Reduction::sum);
        Md fd_ent =
            finite_difference(p, [&](const Md& x) { return entropy_loss(x, Reduction::sum); });
        EXPECT_LT(max_rel_error(g_ent, fd_ent), 1e-4);

        CentroidTable<double> table(8, 8, 0.5);
        for (Eigen::Index r = 0; r < 8; ++r)
            for (Eigen::Index c = 0; c < 8; ++c) table.centroids()(r, c) = rng.normal();
        std::vector<int> z;
        for (int r = 0; r < 16; ++r) z.push_back(static_cast<int>(rng.next_below(8)));
        Md v(16, 8);
        for (Eigen::Index r = 0; r < 16; ++r)
            for (Eigen::Index c = 0; c < 8; ++c) v(r, c) = rng.normal();
        Md g_center = table.grad(v, z, Reduction::sum);
        Md fd_center =
            finite_difference(v, [&](const Md& x) { return table.loss(x, z, Reduction::sum); });
        EXPECT_LT(max_rel_error(g_center, fd_center), 1e-4);
    }
}

TEST(Gradients, ComposedSoftmaxBackwardsMatchFiniteDifferences) {
    Rng rng(78);
    Md logits(6, 5);
    for (Eigen::Index r = 0; r < 6; ++r)
        for (Eigen::Index c = 0; c < 5; ++c) logits(r, c) = rng.normal();
    Md targets = Md::Zero(6, 5);
    for (int r = 0; r < 6; ++r) targets(r, static_cast<int>(rng.next_below(5))) = 1.0;

    Md g = softmax_cross_entropy_backward(softmax(logits), targets, Reduction::sum);
    Md fd = finite_difference(
        logits, [&](const Md& s) { return cross_entropy(softmax(s), targets, Reduction::sum); });
    EXPECT_LT(max_rel_error(g, fd), 1e-4);

    Md ge = entropy_softmax_backward(softmax(logits), Reduction::sum);
    Md fde = finite_difference(
        logits, [&](const Md& s) { return entropy_loss(softmax(s), Reduction::sum); });
    EXPECT_LT(max_rel_error(ge, fde), 1e-4);
}

TEST(Objectives, DefaultsAndBreakdownIdentity) {
    LossWeights w;
    EXPECT_DOUBLE_EQ(w.lambda_1_1, 3.0);
    EXPECT_DOUBLE_EQ(w.lambda_1_2, 0.1);
    EXPECT_DOUBLE_EQ(w.lambda_2_1, 0.1);
    EXPECT_DOUBLE_EQ(w.lambda_2_2, 3.0);

    Rng rng(5);
    Md sem = random_prob_rows(4, 3, rng);
    Md rot = random_prob_rows(4, 12, rng);
    Md v(4, 8);
    for (Eigen::Index r = 0; r < 4; ++r)
        for (Eigen::Index c = 0; c < 8; ++c) v(r, c) = rng.normal();
    std::vector<int> y = {0, 1, 2, 0};
    std::vector<int> z = {0, 5, 11, 2};
    CentroidTable<double> table(12, 8, 0.5);

    auto bd = stage1_objective(sem, y, rot, z, v, table, w, Reduction::mean);
    EXPECT_NEAR(bd.total,
                bd.semantic_ce + w.lambda_1_1 * bd.rotation_ce + w.lambda_1_2 * bd.center, 1e-9);

    // zeroing the extra weights leaves the semantic term alone
    LossWeights zero = w;
    zero.lambda_1_1 = 0.0;
    zero.lambda_1_2 = 0.0;
    CentroidTable<double> table2(12, 8, 0.5);
    auto bd0 = stage1_objective(sem, y, rot, z, v, table2, zero, Reduction::mean);
    EXPECT_NEAR(bd0.total, bd0.semantic_ce, 1e-12);
    EXPECT_NEAR(bd0.semantic_ce,
                cross_entropy(sem, one_hot<double>(y, 3), Reduction::mean), 1e-12);

    // all-perfect predictions with activations at their centroids
    Md sem_perfect = one_hot<double>(y, 3);
    Md rot_perfect = one_hot<double>(z, 12);
    CentroidTable<double> table3(12, 8, 0.5);
    Md v0 = Md::Zero(4, 8);
    auto bdp = stage1_objective(sem_perfect, y, rot_perfect, z, v0, table3, w, Reduction::mean);
    EXPECT_NEAR(bdp.total, 0.0, 1e-9);
}

TEST(Objectives, Stage2BreakdownAndEmptyStreams) {
    Rng rng(6);
    LossWeights w;
    Md src = random_prob_rows(3, 5, rng);  // 4 known + unknown
    Md unk = random_prob_rows(2, 5, rng);
    Md knw = random_prob_rows(2, 5, rng);
    Md rot = random_prob_rows(2, 4, rng);
    std::vector<int> y = {0, 3, 1};
    std::vector<int> ri = {2, 0};

    auto bd = stage2_objective(src, y, unk, knw, rot, ri, w, Reduction::mean);
    EXPECT_NEAR(bd.total,
                bd.supervised_ce + w.lambda_2_1 * bd.entropy + w.lambda_2_2 * bd.rotation_ce,
                1e-9);
    EXPECT_GT(bd.entropy, 0.0);

    // empty known stream: entropy and rotation terms vanish exactly
    auto bd_empty = stage2_objective(src, y, unk, Md(), Md(), {}, w, Reduction::mean);
    EXPECT_DOUBLE_EQ(bd_empty.entropy, 0.0);
    EXPECT_DOUBLE_EQ(bd_empty.rotation_ce, 0.0);

    LossWeights zero = w;
    zero.lambda_2_1 = 0.0;
    zero.lambda_2_2 = 0.0;
    auto bd_sup = stage2_objective(src, y, unk, knw, rot, ri, zero, Reduction::mean);
    EXPECT_NEAR(bd_sup.total, bd_sup.supervised_ce, 1e-12);

    LossWeights negative{-1.0, 0.1, 0.1, 3.0};
    EXPECT_THROW(negative.validate(), ValidationError);
}

TEST(Softmax, RowsNormalizeAndOneHotLabels) {
    Rng rng(9);
    Mat<double> logits(5, 7);
    for (Eigen::Index r = 0; r < 5; ++r)
        for (Eigen::Index c = 0; c < 7; ++c) logits(r, c) = rng.normal(0, 5);
    Md p = softmax(logits);
    for (Eigen::Index r = 0; r < 5; ++r) EXPECT_NEAR(p.row(r).sum(), 1.0, 1e-6);
    EXPECT_THROW(one_hot<double>({7}, 7), DomainError);
}
