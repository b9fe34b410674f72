#pragma once

#include <cmath>
#include <vector>

#include <Eigen/Core>

#include "ros/errors.hpp"

namespace ros {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename T>
using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

enum class Reduction { sum, mean };

namespace detail {
template <typename T>
T reduce(T total, Eigen::Index rows, Reduction red) {
    if (red == Reduction::mean && rows > 0) return total / static_cast<T>(rows);
    return total;
}
constexpr double kLogEps = 1e-12;  // clamp for log() on hard-zero probabilities
}  // namespace detail

template <typename T>
Mat<T> softmax(const Mat<T>& logits) {
    Mat<T> p(logits.rows(), logits.cols());
    for (Eigen::Index r = 0; r < logits.rows(); ++r) {
        T mx = logits.row(r).maxCoeff();
        p.row(r) = (logits.row(r).array() - mx).exp();
        p.row(r) /= p.row(r).sum();
    }
    return p;
}

template <typename T>
Mat<T> one_hot(const std::vector<int>& labels, int width) {
    Mat<T> y = Mat<T>::Zero(static_cast<Eigen::Index>(labels.size()), width);
    for (std::size_t r = 0; r < labels.size(); ++r) {
        if (labels[r] < 0 || labels[r] >= width)
            throw DomainError("one_hot: label " + std::to_string(labels[r]) +
                              " outside width " + std::to_string(width));
        y(static_cast<Eigen::Index>(r), labels[r]) = T(1);
    }
    return y;
}

/// -sum_j y_j . log(p_j) over the batch, log clamped at 1e-12.
template <typename T>
T cross_entropy(const Mat<T>& probs, const Mat<T>& targets, Reduction red = Reduction::sum) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw ShapeError("cross_entropy: probs and targets differ in shape");
    T total = T(0);
    const T eps = static_cast<T>(detail::kLogEps);
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
        for (Eigen::Index c = 0; c < probs.cols(); ++c)
            if (targets(r, c) != T(0))
                total -= targets(r, c) * std::log(std::max(probs(r, c), eps));
    return detail::reduce(total, probs.rows(), red);
}

/// d cross_entropy / d probs. Zero where the clamp is active, matching the
/// clamped forward exactly.
template <typename T>
Mat<T> cross_entropy_grad(const Mat<T>& probs, const Mat<T>& targets,
                          Reduction red = Reduction::sum) {
    if (probs.rows() != targets.rows() || probs.cols() != targets.cols())
        throw ShapeError("cross_entropy_grad: probs and targets differ in shape");
    const T eps = static_cast<T>(detail::kLogEps);
    Mat<T> g = Mat<T>::Zero(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
        for (Eigen::Index c = 0; c < probs.cols(); ++c)
            if (targets(r, c) != T(0) && probs(r, c) > eps)
                g(r, c) = -targets(r, c) / probs(r, c);
    if (red == Reduction::mean && probs.rows() > 0) g /= static_cast<T>(probs.rows());
    return g;
}

/// Shannon entropy summed over rows: sum_j -p_j . log(p_j). Nonnegative;
/// the composite objectives apply their own weights.
template <typename T>
T entropy_loss(const Mat<T>& probs, Reduction red = Reduction::sum) {
    T total = T(0);
    const T eps = static_cast<T>(detail::kLogEps);
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
            T p = probs(r, c);
            if (p > T(0)) total -= p * std::log(std::max(p, eps));
        }
    return detail::reduce(total, probs.rows(), red);
}

template <typename T>
Mat<T> entropy_loss_grad(const Mat<T>& probs, Reduction red = Reduction::sum) {
    const T eps = static_cast<T>(detail::kLogEps);
    Mat<T> g(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r)
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
            T p = probs(r, c);
            g(r, c) = p > eps ? -(std::log(p) + T(1)) : -std::log(eps);
        }
    if (red == Reduction::mean && probs.rows() > 0) g /= static_cast<T>(probs.rows());
    return g;
}

// --- composed-with-softmax gradients used by the training loops -----------

/// d cross_entropy(softmax(s), y) / d s = p - y (times the reduction scale).
template <typename T>
Mat<T> softmax_cross_entropy_backward(const Mat<T>& probs, const Mat<T>& targets,
                                      Reduction red = Reduction::sum) {
    Mat<T> g = probs - targets;
    if (red == Reduction::mean && probs.rows() > 0) g /= static_cast<T>(probs.rows());
    return g;
}

/// d entropy(softmax(s)) / d s = -p .* (log p + H_row).
template <typename T>
Mat<T> entropy_softmax_backward(const Mat<T>& probs, Reduction red = Reduction::sum) {
    const T eps = static_cast<T>(detail::kLogEps);
    Mat<T> g(probs.rows(), probs.cols());
    for (Eigen::Index r = 0; r < probs.rows(); ++r) {
        T h = T(0);
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
            T p = probs(r, c);
            if (p > T(0)) h -= p * std::log(std::max(p, eps));
        }
        for (Eigen::Index c = 0; c < probs.cols(); ++c) {
            T p = probs(r, c);
            g(r, c) = -p * (std::log(std::max(p, eps)) + h);
        }
    }
    if (red == Reduction::mean && probs.rows() > 0) g /= static_cast<T>(probs.rows());
    return g;
}

// --- center loss -----------------------------------------------------------

/// Running per-class centroids of the 256-d penultimate activations.
/// Gradients treat centroids as constants; update() applies the usual
/// running rule gamma <- gamma - alpha * (gamma - batch_mean) per touched
/// class.
template <typename T>
class CentroidTable {
public:
    CentroidTable() = default;
    CentroidTable(int n_classes, int dim, T alpha = T(0.5))
        : centroids_(Mat<T>::Zero(n_classes, dim)), alpha_(alpha) {
        if (alpha <= T(0) || alpha > T(1))
            throw ValidationError("CentroidTable: alpha must be in (0,1]");
    }

    int n_classes() const { return static_cast<int>(centroids_.rows()); }
    int dim() const { return static_cast<int>(centroids_.cols()); }
    T alpha() const { return alpha_; }
    const Mat<T>& centroids() const { return centroids_; }
    Mat<T>& centroids() { return centroids_; }

    /// sum_j ||v_j - gamma(z_j)||^2, pure.
    T loss(const Mat<T>& v, const std::vector<int>& z, Reduction red = Reduction::sum) const {
        check(v, z);
        T total = T(0);
        for (std::size_t j = 0; j < z.size(); ++j)
            total += (v.row(static_cast<Eigen::Index>(j)) - centroids_.row(z[j])).squaredNorm();
        return detail::reduce(total, v.rows(), red);
    }

    /// d loss / d v = 2 (v_j - gamma(z_j)); centroids held fixed.
    Mat<T> grad(const Mat<T>& v, const std::vector<int>& z, Reduction red = Reduction::sum) const {
        check(v, z);
        Mat<T> g(v.rows(), v.cols());
        for (std::size_t j = 0; j < z.size(); ++j)
            g.row(static_cast<Eigen::Index>(j)) =
                T(2) * (v.row(static_cast<Eigen::Index>(j)) - centroids_.row(z[j]));
        if (red == Reduction::mean && v.rows() > 0) g /= static_cast<T>(v.rows());
        return g;
    }

    void update(const Mat<T>& v, const std::vector<int>& z) {
        check(v, z);
        std::vector<int> counts(static_cast<std::size_t>(n_classes()), 0);
        Mat<T> sums = Mat<T>::Zero(n_classes(), dim());
        for (std::size_t j = 0; j < z.size(); ++j) {
            sums.row(z[j]) += v.row(static_cast<Eigen::Index>(j));
            counts[static_cast<std::size_t>(z[j])]++;
        }
        for (int c = 0; c < n_classes(); ++c)
            if (counts[static_cast<std::size_t>(c)] > 0) {
                Vec<T> mean = sums.row(c) / static_cast<T>(counts[static_cast<std::size_t>(c)]);
                centroids_.row(c) -= alpha_ * (centroids_.row(c) - mean.transpose());
            }
    }

private:
    void check(const Mat<T>& v, const std::vector<int>& z) const {
        if (v.rows() != static_cast<Eigen::Index>(z.size()))
            throw ShapeError("center loss: activations and labels differ in count");
        if (v.cols() != centroids_.cols())
            throw ShapeError("center loss: activation width differs from table");
        for (int label : z)
            if (label < 0 || label >= n_classes())
                throw DomainError("center loss: label " + std::to_string(label) +
                                  " outside table range");
    }

    Mat<T> centroids_;
    T alpha_ = T(0.5);
};

/// Loss value followed by the centroid update.
template <typename T>
T center_loss(const Mat<T>& v, const std::vector<int>& z, CentroidTable<T>& table,
              Reduction red = Reduction::sum) {
    T value = table.loss(v, z, red);
    table.update(v, z);
    return value;
}

// --- composite objectives ----------------------------------------------------

struct LossWeights {
    double lambda_1_1 = 3.0;  // rotation cross-entropy weight, stage one
    double lambda_1_2 = 0.1;  // center-loss weight
    double lambda_2_1 = 0.1;  // entropy weight, stage two
    double lambda_2_2 = 3.0;  // rotation cross-entropy weight, stage two

    void validate() const {
        if (lambda_1_1 < 0 || lambda_1_2 < 0 || lambda_2_1 < 0 || lambda_2_2 < 0)
            throw ValidationError("LossWeights: weights must be nonnegative");
    }
};

template <typename T>
struct Stage1Breakdown {
    T total = T(0);
    T semantic_ce = T(0);
    T rotation_ce = T(0);
    T center = T(0);
};

/// L1 = CE(y_hat, y) + l11 * CE(z_hat, z) + l12 * center. The total is
/// assembled from the reported terms, so the breakdown identity is exact.
/// Updates the centroid table unless the center weight is zero.
template <typename T>
Stage1Breakdown<T> stage1_objective(const Mat<T>& semantic_probs, const std::vector<int>& y,
                                    const Mat<T>& rotation_probs, const std::vector<int>& z,
                                    const Mat<T>& v, CentroidTable<T>& table,
                                    const LossWeights& w, Reduction red = Reduction::mean) {
    Stage1Breakdown<T> out;
    out.semantic_ce =
        cross_entropy(semantic_probs, one_hot<T>(y, static_cast<int>(semantic_probs.cols())), red);
    out.rotation_ce =
        cross_entropy(rotation_probs, one_hot<T>(z, static_cast<int>(rotation_probs.cols())), red);
    if (w.lambda_1_2 > 0) {
        out.center = table.loss(v, z, red);
        table.update(v, z);
    }
    out.total = out.semantic_ce + static_cast<T>(w.lambda_1_1) * out.rotation_ce +
                static_cast<T>(w.lambda_1_2) * out.center;
    return out;
}

template <typename T>
struct Stage2Breakdown {
    T total = T(0);
    T supervised_ce = T(0);  // source plus predicted-unknown stream
    T entropy = T(0);        // predicted-known stream
    T rotation_ce = T(0);    // relative rotation on the predicted-known stream
};

/// L2 = CE(source U unk) + l21 * entropy(knw) + l22 * CE(rotations of knw).
/// Streams weight each other through their batch contributions; empty
/// streams contribute exact zeros.
template <typename T>
Stage2Breakdown<T> stage2_objective(const Mat<T>& source_probs, const std::vector<int>& source_y,
                                    const Mat<T>& unk_probs, const Mat<T>& knw_probs,
                                    const Mat<T>& rotation_probs, const std::vector<int>& rotation_i,
                                    const LossWeights& w, Reduction red = Reduction::mean) {
    Stage2Breakdown<T> out;
    const int width = static_cast<int>(source_probs.cols() > 0 ? source_probs.cols()
                                                               : unk_probs.cols());
    const Eigen::Index n_sup = source_probs.rows() + unk_probs.rows();
    if (n_sup > 0) {
        Mat<T> probs(n_sup, width);
        Mat<T> targets = Mat<T>::Zero(n_sup, width);
        if (source_probs.rows() > 0) {
            probs.topRows(source_probs.rows()) = source_probs;
            targets.topRows(source_probs.rows()) = one_hot<T>(source_y, width);
        }
        if (unk_probs.rows() > 0) {
            probs.bottomRows(unk_probs.rows()) = unk_probs;
            targets.bottomRows(unk_probs.rows()).col(width - 1).setConstant(T(1));
        }
        out.supervised_ce = cross_entropy(probs, targets, red);
    }
    if (knw_probs.rows() > 0) out.entropy = entropy_loss(knw_probs, red);
    if (rotation_probs.rows() > 0)
        out.rotation_ce = cross_entropy(
            rotation_probs, one_hot<T>(rotation_i, static_cast<int>(rotation_probs.cols())), red);
    out.total = out.supervised_ce + static_cast<T>(w.lambda_2_1) * out.entropy +
                static_cast<T>(w.lambda_2_2) * out.rotation_ce;
    return out;
}

}  // namespace ros
