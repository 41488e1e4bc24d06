#pragma once

#include "binn/common.hpp"
#include "binn/mlp.hpp"

#include <random>
#include <vector>

namespace binn {

// Odd/even affine coupling block. The scale net phi_W and shift net phi_b act on
// one half and update the other; both half-steps share the two subnets.
class AffineCouplingBlock {
public:
    struct Cache {
        Mat o, e, o1, e1;  // halves before and after the block
        Mat x1, x2;        // exp(+-s) of the two half-steps, sign as applied
        Mat ds1, ds2;      // clamp derivatives at the raw scale outputs
        Mlp::Cache sw1, sb1, sw2, sb2;
    };

    AffineCouplingBlock() = default;
    AffineCouplingBlock(int dim, int hidden, double s_max = 5.0) : dim_(dim), s_max_(s_max) {
        require(dim % 2 == 0 && dim >= 2, "AffineCouplingBlock: dimension must be even");
        const int h = dim / 2;
        scale_ = Mlp({h, hidden, hidden, hidden, h});
        shift_ = Mlp({h, hidden, hidden, hidden, h});
    }

    int dim() const { return dim_; }
    int half() const { return dim_ / 2; }
    double s_max() const { return s_max_; }
    Mlp& scale_net() { return scale_; }
    const Mlp& scale_net() const { return scale_; }
    Mlp& shift_net() { return shift_; }
    const Mlp& shift_net() const { return shift_; }

    double clamp(double a) const { return s_max_ * std::tanh(a / s_max_); }
    Mat clamp(const Mat& a) const { return a.unaryExpr([this](double v) { return clamp(v); }); }
    Mat clamp_d(const Mat& a) const {
        return a.unaryExpr([this](double v) {
            double t = std::tanh(v / s_max_);
            return 1.0 - t * t;
        });
    }

    // g_o: rows 0,2,4,..; g_e: rows 1,3,5,..
    Mat odd(const Mat& U) const { return take(U, 0); }
    Mat even(const Mat& U) const { return take(U, 1); }
    Mat combine(const Mat& o, const Mat& e) const {
        Mat U(dim_, o.cols());
        for (int i = 0; i < half(); ++i) {
            U.row(2 * i) = o.row(i);
            U.row(2 * i + 1) = e.row(i);
        }
        return U;
    }

    Mat forward(const Mat& U, Cache* c = nullptr) const {
        Mat o = odd(U), e = even(U);
        Mlp::Cache sw1, sb1, sw2, sb2;
        Mat x1, x2, ds1, ds2;
        scale_exp(scale_.forward(e, c ? &sw1 : nullptr), 1.0, x1, c ? &ds1 : nullptr);
        Mat o1 = o.cwiseProduct(x1) + shift_.forward(e, c ? &sb1 : nullptr);
        scale_exp(scale_.forward(o1, c ? &sw2 : nullptr), 1.0, x2, c ? &ds2 : nullptr);
        Mat e1 = e.cwiseProduct(x2) + shift_.forward(o1, c ? &sb2 : nullptr);
        Mat out = combine(o1, e1);
        if (c) {
            c->o = std::move(o);
            c->e = std::move(e);
            c->o1 = std::move(o1);
            c->e1 = std::move(e1);
            c->x1 = std::move(x1);
            c->x2 = std::move(x2);
            c->ds1 = std::move(ds1);
            c->ds2 = std::move(ds2);
            c->sw1 = std::move(sw1);
            c->sb1 = std::move(sb1);
            c->sw2 = std::move(sw2);
            c->sb2 = std::move(sb2);
        }
        return out;
    }

    Mat inverse(const Mat& V, Cache* c = nullptr) const {
        Mat o1 = odd(V), e1 = even(V);
        Mlp::Cache sw1, sb1, sw2, sb2;
        Mat x1, x2, ds1, ds2;
        scale_exp(scale_.forward(o1, c ? &sw2 : nullptr), -1.0, x2, c ? &ds2 : nullptr);
        Mat e = (e1 - shift_.forward(o1, c ? &sb2 : nullptr)).cwiseProduct(x2);
        scale_exp(scale_.forward(e, c ? &sw1 : nullptr), -1.0, x1, c ? &ds1 : nullptr);
        Mat o = (o1 - shift_.forward(e, c ? &sb1 : nullptr)).cwiseProduct(x1);
        Mat out = combine(o, e);
        if (c) {
            c->o = std::move(o);
            c->e = std::move(e);
            c->o1 = std::move(o1);
            c->e1 = std::move(e1);
            c->x1 = std::move(x1);
            c->x2 = std::move(x2);
            c->ds1 = std::move(ds1);
            c->ds2 = std::move(ds2);
            c->sw1 = std::move(sw1);
            c->sb1 = std::move(sb1);
            c->sw2 = std::move(sw2);
            c->sb2 = std::move(sb2);
        }
        return out;
    }

    // Reverse pass through forward(); dout is the gradient w.r.t. the block output.
    Mat backward_forward(const Cache& c, const Mat& dout, AffineCouplingBlock* grad) const {
        Mat dO1 = odd(dout), dE1 = even(dout);
        Mlp* gs = grad ? &grad->scale_ : nullptr;
        Mlp* gt = grad ? &grad->shift_ : nullptr;

        Mat dE = dE1.cwiseProduct(c.x2);
        Mat dA2 = dE.cwiseProduct(c.e).cwiseProduct(c.ds2);
        dO1 += scale_.backward(c.sw2, dA2, gs) + shift_.backward(c.sb2, dE1, gt);

        Mat dO = dO1.cwiseProduct(c.x1);
        Mat dA1 = dO.cwiseProduct(c.o).cwiseProduct(c.ds1);
        dE += scale_.backward(c.sw1, dA1, gs) + shift_.backward(c.sb1, dO1, gt);
        return combine(dO, dE);
    }

    // Reverse pass through inverse(); dout is the gradient w.r.t. the recovered input.
    Mat backward_inverse(const Cache& c, const Mat& dout, AffineCouplingBlock* grad) const {
        Mat dO = odd(dout), dE = even(dout);
        Mlp* gs = grad ? &grad->scale_ : nullptr;
        Mlp* gt = grad ? &grad->shift_ : nullptr;

        Mat dO1 = dO.cwiseProduct(c.x1);
        Mat dA1 = -dO.cwiseProduct(c.o).cwiseProduct(c.ds1);
        dE += scale_.backward(c.sw1, dA1, gs) + shift_.backward(c.sb1, -dO1, gt);

        Mat dE1 = dE.cwiseProduct(c.x2);
        Mat dA2 = -dE.cwiseProduct(c.e).cwiseProduct(c.ds2);
        dO1 += scale_.backward(c.sw2, dA2, gs) + shift_.backward(c.sb2, -dE1, gt);
        return combine(dO1, dE1);
    }

    Vec forward(const Vec& u) const { return forward(Mat(u)).col(0); }
    Vec inverse(const Vec& v) const { return inverse(Mat(v)).col(0); }

    Mat jacobian(const Vec& u) const {
        Cache c;
        forward(Mat(u), &c);
        Mat J(dim_, dim_);
        for (int i = 0; i < dim_; ++i) {
            Mat seed = Mat::Zero(dim_, 1);
            seed(i, 0) = 1.0;
            J.row(i) = backward_forward(c, seed, nullptr).col(0).transpose();
        }
        return J;
    }

    Mat inverse_jacobian(const Vec& v) const {
        Cache c;
        inverse(Mat(v), &c);
        Mat J(dim_, dim_);
        for (int i = 0; i < dim_; ++i) {
            Mat seed = Mat::Zero(dim_, 1);
            seed(i, 0) = 1.0;
            J.row(i) = backward_inverse(c, seed, nullptr).col(0).transpose();
        }
        return J;
    }

    std::size_t param_count() const { return scale_.param_count() + shift_.param_count(); }
    void pack(double* out) const {
        scale_.pack(out);
        shift_.pack(out + scale_.param_count());
    }
    void unpack(const double* in) {
        scale_.unpack(in);
        shift_.unpack(in + scale_.param_count());
    }
    void zero() {
        scale_.zero();
        shift_.zero();
    }

private:
    // x = exp(sign * clamp(a)); ds = clamp'(a) when requested. One tanh per entry.
    void scale_exp(const Mat& a, double sign, Mat& x, Mat* ds) const {
        x.resize(a.rows(), a.cols());
        if (ds) ds->resize(a.rows(), a.cols());
        for (Eigen::Index k = 0; k < a.size(); ++k) {
            const double t = std::tanh(a.data()[k] / s_max_);
            x.data()[k] = std::exp(sign * s_max_ * t);
            if (ds) ds->data()[k] = 1.0 - t * t;
        }
    }

    Mat take(const Mat& U, int offset) const {
        Mat h(half(), U.cols());
        for (int i = 0; i < half(); ++i) h.row(i) = U.row(2 * i + offset);
        return h;
    }

    int dim_ = 10;
    double s_max_ = 5.0;
    Mlp scale_, shift_;
};

// Stack of coupling blocks with a flat parameter view for the optimizer.
class CouplingINN {
public:
    struct Config {
        int dim = 10;
        int blocks = 3;
        int hidden = 32;
        double s_max = 5.0;
    };

    CouplingINN() = default;
    explicit CouplingINN(const Config& cfg) : cfg_(cfg) {
        require(cfg.blocks >= 1, "CouplingINN: need at least one block");
        for (int k = 0; k < cfg.blocks; ++k) blocks_.emplace_back(cfg.dim, cfg.hidden, cfg.s_max);
    }

    static CouplingINN init(const Config& cfg, std::uint64_t seed) {
        CouplingINN m(cfg);
        std::mt19937_64 rng(seed);
        for (auto& b : m.blocks_) {
            b.scale_net().init_glorot(rng);
            b.shift_net().init_glorot(rng);
        }
        return m;
    }

    const Config& config() const { return cfg_; }
    int dim() const { return cfg_.dim; }
    std::vector<AffineCouplingBlock>& blocks() { return blocks_; }
    const std::vector<AffineCouplingBlock>& blocks() const { return blocks_; }

    Mat forward(const Mat& U, std::vector<AffineCouplingBlock::Cache>* caches = nullptr) const {
        check(U);
        if (caches) caches->resize(blocks_.size());
        Mat X = U;
        for (std::size_t k = 0; k < blocks_.size(); ++k) X = blocks_[k].forward(X, caches ? &(*caches)[k] : nullptr);
        return X;
    }

    Mat inverse(const Mat& V, std::vector<AffineCouplingBlock::Cache>* caches = nullptr) const {
        check(V);
        if (caches) caches->resize(blocks_.size());
        Mat X = V;
        for (std::size_t k = blocks_.size(); k-- > 0;)
            X = blocks_[k].inverse(X, caches ? &(*caches)[k] : nullptr);
        return X;
    }

    Vec forward(const Vec& u) const { return forward(Mat(u)).col(0); }
    Vec inverse(const Vec& v) const { return inverse(Mat(v)).col(0); }

    Mat backward_forward(const std::vector<AffineCouplingBlock::Cache>& caches, const Mat& dout,
                         CouplingINN* grad) const {
        Mat d = dout;
        for (std::size_t k = blocks_.size(); k-- > 0;)
            d = blocks_[k].backward_forward(caches[k], d, grad ? &grad->blocks_[k] : nullptr);
        return d;
    }

    Mat backward_inverse(const std::vector<AffineCouplingBlock::Cache>& caches, const Mat& dout,
                         CouplingINN* grad) const {
        Mat d = dout;
        for (std::size_t k = 0; k < blocks_.size(); ++k)
            d = blocks_[k].backward_inverse(caches[k], d, grad ? &grad->blocks_[k] : nullptr);
        return d;
    }

    std::size_t param_count() const {
        std::size_t c = 0;
        for (const auto& b : blocks_) c += b.param_count();
        return c;
    }

    Vec params() const {
        Vec p(param_count());
        double* out = p.data();
        for (const auto& b : blocks_) {
            b.pack(out);
            out += b.param_count();
        }
        return p;
    }

    void set_params(const Vec& p) {
        require(static_cast<std::size_t>(p.size()) == param_count(), "CouplingINN: parameter length mismatch");
        const double* in = p.data();
        for (auto& b : blocks_) {
            b.unpack(in);
            in += b.param_count();
        }
    }

    void zero() {
        for (auto& b : blocks_) b.zero();
    }

private:
    void check(const Mat& U) const {
        if (U.rows() != cfg_.dim) throw DimensionError("CouplingINN: input has wrong dimension");
        if (!U.allFinite()) throw Error("CouplingINN: non-finite input");
    }

    Config cfg_;
    std::vector<AffineCouplingBlock> blocks_;
};

}  // namespace binn
