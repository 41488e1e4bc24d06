#pragma once

#include "binn/common.hpp"

namespace binn {

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class Adam {
public:
    Adam() = default;
    Adam(Eigen::Index size, AdamConfig cfg = {}) : cfg_(cfg), m_(Vec::Zero(size)), v_(Vec::Zero(size)) {}

    const AdamConfig& config() const { return cfg_; }
    long step_count() const { return t_; }
    const Vec& m() const { return m_; }
    const Vec& v() const { return v_; }

    void step(Vec& theta, const Vec& g) {
        require(theta.size() == m_.size() && g.size() == m_.size(), "Adam: size mismatch");
        ++t_;
        m_ = cfg_.beta1 * m_ + (1.0 - cfg_.beta1) * g;
        v_ = cfg_.beta2 * v_ + (1.0 - cfg_.beta2) * g.cwiseProduct(g);
        const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
        for (Eigen::Index i = 0; i < theta.size(); ++i) {
            double mh = m_(i) / c1;
            double vh = v_(i) / c2;
            theta(i) -= cfg_.lr * mh / (std::sqrt(vh) + cfg_.eps);
        }
    }

private:
    AdamConfig cfg_;
    Vec m_, v_;
    long t_ = 0;
};

}  // namespace binn
