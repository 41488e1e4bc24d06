#pragma once

#include "binn/common.hpp"

#include <algorithm>
#include <vector>

namespace binn {

// Per-coordinate piecewise-linear map h^r on [0,1] with n cells. Node values:
// j/n -> j/n and (j+r)/n -> (j+1-r)/n, identity outside [0,1].
class PwlNet {
public:
    PwlNet() = default;
    PwlNet(int n, double r) : n_(n), r_(r) {
        require(n >= 1, "PwlNet: n must be >= 1");
        require(r > 0.0 && r < 1.0, "PwlNet: r must lie in (0,1)");
        build();
    }

    int n() const { return n_; }
    double r() const { return r_; }
    std::size_t hidden_width() const { return w0_.size(); }

    double c_r() const { return (2.0 * r_ - 1.0) / (r_ * (1.0 - r_)); }

    const std::vector<double>& w0() const { return w0_; }
    const std::vector<double>& b0() const { return b0_; }
    const std::vector<double>& w1() const { return w1_; }

    // Direct piecewise evaluation.
    double eval(double x) const {
        if (x <= 0.0 || x >= 1.0) return x;
        auto k = segment(xs_, x);
        return ys_[k] + slope_[k] * (x - xs_[k]);
    }

    // Two-layer ReLU realization W1 relu(W0 x + b0).
    double eval_net(double x) const {
        double s = 0.0;
        for (std::size_t i = 0; i < w0_.size(); ++i) s += w1_[i] * relu(w0_[i] * x + b0_[i]);
        return s;
    }

    double inverse(double y) const {
        if (y <= 0.0 || y >= 1.0) return y;
        auto k = segment(ys_, y);
        return xs_[k] + (y - ys_[k]) / slope_[k];
    }

    // Right-continuous slope.
    double derivative(double x) const {
        if (x < 0.0 || x >= 1.0) return 1.0;
        return slope_[segment(xs_, x)];
    }

    double inverse_derivative(double y) const {
        if (y < 0.0 || y >= 1.0) return 1.0;
        return 1.0 / slope_[segment(ys_, y)];
    }

    double max_slope() const {
        return std::max({1.0, (1.0 - r_) / r_, r_ / (1.0 - r_)});
    }

private:
    static std::size_t segment(const std::vector<double>& nodes, double t) {
        auto it = std::upper_bound(nodes.begin(), nodes.end(), t);
        std::size_t k = static_cast<std::size_t>(it - nodes.begin());
        k = k == 0 ? 0 : k - 1;
        return std::min(k, nodes.size() - 2);
    }

    void build() {
        const double n = n_;
        xs_.clear();
        ys_.clear();
        for (int j = 0; j < n_; ++j) {
            xs_.push_back(j / n);
            ys_.push_back(j / n);
            xs_.push_back((j + r_) / n);
            ys_.push_back((j + 1 - r_) / n);
        }
        xs_.push_back(1.0);
        ys_.push_back(1.0);
        slope_.resize(xs_.size() - 1);
        for (std::size_t k = 0; k + 1 < xs_.size(); ++k)
            slope_[k] = (k % 2 == 0) ? (1.0 - r_) / r_ : r_ / (1.0 - r_);

        // Hidden units: relu(-x), relu(x - a_i) for i=0..n, relu(x - p_i) for i=1..n.
        const double cr = c_r();
        w0_.assign(1, -1.0);
        b0_.assign(1, 0.0);
        w1_.assign(1, -1.0);
        for (int i = 0; i <= n_; ++i) {
            w0_.push_back(1.0);
            b0_.push_back(-i / n);
            if (i == 0)
                w1_.push_back((1.0 - r_) / r_);
            else if (i == n_)
                w1_.push_back(-(2.0 * r_ - 1.0) / (1.0 - r_));
            else
                w1_.push_back(-cr);
        }
        for (int i = 1; i <= n_; ++i) {
            w0_.push_back(1.0);
            b0_.push_back(-(i - 1 + r_) / n);
            w1_.push_back(cr);
        }
    }

    int n_ = 1;
    double r_ = 0.5;
    std::vector<double> xs_, ys_, slope_;
    std::vector<double> w0_, b0_, w1_;
};

}  // namespace binn
