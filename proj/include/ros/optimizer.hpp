#pragma once

#include <cmath>
#include <vector>

#include "ros/layers.hpp"

namespace ros {

/// lr(p) = lr0 * (1 + gamma*p)^(-power) with p = progress in [0,1].
struct InverseDecaySchedule {
    double gamma = 10.0;
    double power = 0.75;

    double scale(double progress) const { return std::pow(1.0 + gamma * progress, -power); }
};

/// SGD with momentum and weight decay: v <- mu*v + (g + wd*w); w -= lr*v.
/// lr is base_lr * schedule * param multiplier (* row multiplier if set).
template <typename T>
class SgdOptimizer {
public:
    SgdOptimizer(std::vector<Param<T>*> params, T base_lr, T momentum = T(0.9),
                 T weight_decay = T(0.0005))
        : params_(std::move(params)), base_lr_(base_lr), momentum_(momentum),
          weight_decay_(weight_decay) {
        velocity_.reserve(params_.size());
        for (Param<T>* p : params_) velocity_.push_back(Mat<T>::Zero(p->value.rows(), p->value.cols()));
    }

    void zero_grad() {
        for (Param<T>* p : params_) p->zero_grad();
    }

    void step(double schedule_scale) {
        for (std::size_t i = 0; i < params_.size(); ++i) {
            Param<T>& p = *params_[i];
            if (!p.trainable) continue;
            Mat<T>& vel = velocity_[i];
            vel = momentum_ * vel + (p.grad + weight_decay_ * p.value);
            T lr = base_lr_ * static_cast<T>(schedule_scale) * p.lr_mult;
            if (p.row_lr_mult.empty() && p.col_lr_mult.empty()) {
                p.value -= lr * vel;
            } else if (!p.row_lr_mult.empty()) {
                for (Eigen::Index r = 0; r < p.value.rows(); ++r) {
                    T row_mult = r < static_cast<Eigen::Index>(p.row_lr_mult.size())
                                     ? p.row_lr_mult[static_cast<std::size_t>(r)]
                                     : T(1);
                    p.value.row(r) -= lr * row_mult * vel.row(r);
                }
            } else {
                for (Eigen::Index c = 0; c < p.value.cols(); ++c) {
                    T col_mult = c < static_cast<Eigen::Index>(p.col_lr_mult.size())
                                     ? p.col_lr_mult[static_cast<std::size_t>(c)]
                                     : T(1);
                    p.value.col(c) -= lr * col_mult * vel.col(c);
                }
            }
        }
    }

private:
    std::vector<Param<T>*> params_;
    std::vector<Mat<T>> velocity_;
    T base_lr_;
    T momentum_;
    T weight_decay_;
};

}  // namespace ros
