#pragma once

#include "binn/common.hpp"

#include <random>
#include <vector>

namespace binn {

// Fully connected ReLU net; the output layer is linear. Columns are samples.
class Mlp {
public:
    struct Cache {
        std::vector<Mat> act;  // act[0] = input, act[l] = post-activation of layer l
        std::vector<Mat> pre;  // pre-activations
    };

    Mlp() = default;
    explicit Mlp(std::vector<int> widths) : widths_(std::move(widths)) {
        require(widths_.size() >= 2, "Mlp: need at least two widths");
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
            require(widths_[l] > 0 && widths_[l + 1] > 0, "Mlp: widths must be positive");
            W_.push_back(Mat::Zero(widths_[l + 1], widths_[l]));
            b_.push_back(Vec::Zero(widths_[l + 1]));
        }
    }

    const std::vector<int>& widths() const { return widths_; }
    std::size_t layers() const { return W_.size(); }
    int in_dim() const { return widths_.front(); }
    int out_dim() const { return widths_.back(); }

    Mat& weight(std::size_t l) { return W_[l]; }
    const Mat& weight(std::size_t l) const { return W_[l]; }
    Vec& bias(std::size_t l) { return b_[l]; }
    const Vec& bias(std::size_t l) const { return b_[l]; }

    std::size_t param_count() const {
        std::size_t c = 0;
        for (std::size_t l = 0; l + 1 < widths_.size(); ++l)
            c += static_cast<std::size_t>(widths_[l] + 1) * widths_[l + 1];
        return c;
    }

    // Glorot-uniform weights, zero biases.
    template <class Rng>
    void init_glorot(Rng& rng) {
        for (std::size_t l = 0; l < W_.size(); ++l) {
            double a = std::sqrt(6.0 / (W_[l].rows() + W_[l].cols()));
            std::uniform_real_distribution<double> U(-a, a);
            for (Eigen::Index j = 0; j < W_[l].cols(); ++j)
                for (Eigen::Index i = 0; i < W_[l].rows(); ++i) W_[l](i, j) = U(rng);
            b_[l].setZero();
        }
    }

    Mat forward(const Mat& X, Cache* cache = nullptr) const {
        if (cache) {
            cache->act.resize(W_.size() + 1);
            cache->pre.resize(W_.size());
            cache->act[0] = X;
        }
        Mat a = X, z;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            z.noalias() = W_[l] * a;
            z.colwise() += b_[l];
            if (l + 1 < W_.size())
                a = z.cwiseMax(0.0);
            else
                a = z;
            if (cache) {
                cache->pre[l] = z;
                cache->act[l + 1] = a;
            }
        }
        return a;
    }

    Vec forward(const Vec& x) const { return forward(Mat(x)).col(0); }

    // Reverse pass. Accumulates into grad (same layout as this net) if given and
    // returns the gradient with respect to the input.
    Mat backward(const Cache& cache, const Mat& dout, Mlp* grad) const {
        Mat d = dout, next;
        for (std::size_t l = W_.size(); l-- > 0;) {
            if (l + 1 < W_.size()) d.array() *= (cache.pre[l].array() >= 0.0).template cast<double>();
            if (grad) {
                grad->W_[l].noalias() += d * cache.act[l].transpose();
                grad->b_[l].noalias() += d.rowwise().sum();
            }
            next.noalias() = W_[l].transpose() * d;
            d.swap(next);
        }
        return d;
    }

    // Input Jacobian at a single point.
    Mat jacobian(const Vec& x) const {
        Mat J = Mat::Identity(x.size(), x.size());
        Vec a = x;
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Vec z = W_[l] * a + b_[l];
            J = W_[l] * J;
            if (l + 1 < W_.size()) {
                for (Eigen::Index i = 0; i < z.size(); ++i)
                    if (z(i) < 0.0) J.row(i).setZero();
                a = z.cwiseMax(0.0);
            } else {
                a = z;
            }
        }
        return J;
    }

    void zero() {
        for (auto& w : W_) w.setZero();
        for (auto& b : b_) b.setZero();
    }

    void pack(double* out) const {
        for (std::size_t l = 0; l < W_.size(); ++l) {
            Eigen::Map<Mat>(out, W_[l].rows(), W_[l].cols()) = W_[l];
            out += W_[l].size();
            Eigen::Map<Vec>(out, b_[l].size()) = b_[l];
            out += b_[l].size();
        }
    }

    void unpack(const double* in) {
        for (std::size_t l = 0; l < W_.size(); ++l) {
            W_[l] = Eigen::Map<const Mat>(in, W_[l].rows(), W_[l].cols());
            in += W_[l].size();
            b_[l] = Eigen::Map<const Vec>(in, b_[l].size());
            in += b_[l].size();
        }
    }

private:
    std::vector<int> widths_;
    std::vector<Mat> W_;
    std::vector<Vec> b_;
};

}  // namespace binn
