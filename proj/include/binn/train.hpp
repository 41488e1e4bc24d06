#pragma once

#include "binn/adam.hpp"
#include "binn/coupling.hpp"
#include "binn/io.hpp"
#include "binn/rng.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace binn {

// Reduced pairs (u_hat, y_hat) as columns, with the PCA weight vectors.
struct PipelineData {
    Mat u_train, y_train;
    Mat u_test, y_test;
    Vec w_u, w_y;
};

struct TrainConfig {
    CouplingINN::Config arch;
    double c0 = 1e-3;
    AdamConfig adam;
    long max_steps = 20000;
    long batch = 0;  // 0: full batch
    std::uint64_t seed = 1;
    long record_every = 200;
    long early_stop_window = 0;  // records without improvement; 0 disables

    nlohmann::json to_json() const {
        return {{"dim", arch.dim},         {"blocks", arch.blocks},     {"hidden", arch.hidden},
                {"s_max", arch.s_max},     {"c0", c0},                  {"lr", adam.lr},
                {"beta1", adam.beta1},     {"beta2", adam.beta2},       {"adam_eps", adam.eps},
                {"max_steps", max_steps},  {"batch", batch},            {"seed", seed},
                {"record_every", record_every}, {"early_stop_window", early_stop_window}};
    }

    static TrainConfig from_json(const nlohmann::json& j) {
        TrainConfig c;
        c.arch.dim = j.at("dim");
        c.arch.blocks = j.at("blocks");
        c.arch.hidden = j.at("hidden");
        c.arch.s_max = j.at("s_max");
        c.c0 = j.at("c0");
        c.adam.lr = j.at("lr");
        c.adam.beta1 = j.at("beta1");
        c.adam.beta2 = j.at("beta2");
        c.adam.eps = j.at("adam_eps");
        c.max_steps = j.at("max_steps");
        c.batch = j.at("batch");
        c.seed = j.at("seed");
        c.record_every = j.at("record_every");
        c.early_stop_window = j.at("early_stop_window");
        return c;
    }

    void validate() const {
        require(c0 > 0.0, "train config: c0 must be positive");
        require(adam.lr > 0.0, "train config: learning rate must be positive");
        require(max_steps >= 0 && record_every >= 1, "train config: bad step counts");
    }
};

// (c0/2) sum ||(U - Phi^-1(Y)) w_u||^2 + (1/2) sum ||(Y - Phi(U)) w_y||^2; grad is overwritten if given.
inline double loss_and_grad(const CouplingINN& model, const Mat& U, const Mat& Y, double c0, const Vec& w_u,
                            const Vec& w_y, Vec* grad = nullptr) {
    require(U.cols() == Y.cols(), "loss: U and Y must have the same sample count");
    require((w_u.array() >= 0.0).all() && (w_y.array() >= 0.0).all(), "loss: weights must be nonnegative");
    std::vector<AffineCouplingBlock::Cache> cf, ci;
    Mat Yp = model.forward(U, grad ? &cf : nullptr);
    Mat Up = model.inverse(Y, grad ? &ci : nullptr);
    Mat ry = (Yp - Y).array().colwise() * w_y.array();
    Mat ru = (Up - U).array().colwise() * w_u.array();
    const double loss = 0.5 * c0 * ru.squaredNorm() + 0.5 * ry.squaredNorm();
    if (grad) {
        CouplingINN g(model.config());
        Mat dy = ry.array().colwise() * w_y.array();
        Mat du = c0 * (ru.array().colwise() * w_u.array()).matrix();
        model.backward_forward(cf, dy, &g);
        model.backward_inverse(ci, du, &g);
        *grad = g.params();
    }
    return loss;
}

inline double loss(const CouplingINN& model, const Mat& U, const Mat& Y, double c0, const Vec& w_u, const Vec& w_y) {
    return loss_and_grad(model, U, Y, c0, w_u, w_y, nullptr);
}

// sqrt(sum ||(target - pred) w||^2 / sum ||target w||^2)
inline double relative_error(const Mat& target, const Mat& pred, const Vec& w) {
    double num = ((target - pred).array().colwise() * w.array()).matrix().squaredNorm();
    double den = (target.array().colwise() * w.array()).matrix().squaredNorm();
    require(den > 0.0, "relative_error: zero denominator");
    return std::sqrt(num / den);
}

struct Metrics {
    double e_a_fwd = 0.0, e_g_fwd = 0.0, e_a_inv = 0.0, e_g_inv = 0.0;
};

inline Metrics relative_errors(const CouplingINN& model, const PipelineData& d) {
    Metrics m;
    m.e_a_fwd = relative_error(d.y_train, model.forward(d.u_train), d.w_y);
    m.e_a_inv = relative_error(d.u_train, model.inverse(d.y_train), d.w_u);
    m.e_g_fwd = relative_error(d.y_test, model.forward(d.u_test), d.w_y);
    m.e_g_inv = relative_error(d.u_test, model.inverse(d.y_test), d.w_u);
    return m;
}

struct MetricsRow {
    long step = 0;
    double loss = 0.0;
    Metrics m;
};

inline std::string history_csv(const std::vector<MetricsRow>& h) {
    std::string s = "step,loss,e_a_fwd,e_g_fwd,e_a_inv,e_g_inv\n";
    char buf[256];
    for (const auto& r : h) {
        std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.loss, r.m.e_a_fwd,
                      r.m.e_g_fwd, r.m.e_a_inv, r.m.e_g_inv);
        s += buf;
    }
    return s;
}

// Inverse e_g rises after its minimum: the minimum is not the last record and the
// last value exceeds it by at least `rel` relative.
inline bool semi_converged(const std::vector<MetricsRow>& h, double rel = 0.01) {
    if (h.size() < 3) return false;
    std::size_t k = 0;
    for (std::size_t i = 1; i < h.size(); ++i)
        if (h[i].m.e_g_inv < h[k].m.e_g_inv) k = i;
    return k + 1 < h.size() && h.back().m.e_g_inv >= (1.0 + rel) * h[k].m.e_g_inv;
}

struct TrainResult {
    CouplingINN final_model;
    CouplingINN best_model;  // minimises e_g_fwd + e_g_inv over the records
    long best_step = 0;
    long steps = 0;
    std::vector<MetricsRow> history;
    double min_e_g_fwd = std::numeric_limits<double>::infinity();
    double min_e_g_inv = std::numeric_limits<double>::infinity();
    Metrics best;
};

inline TrainResult train(CouplingINN model, const PipelineData& data, const TrainConfig& cfg) {
    cfg.validate();
    require(data.u_train.cols() >= 1 && data.u_test.cols() >= 1, "train: empty split");
    const long N = data.u_train.cols();
    const long B = cfg.batch > 0 ? std::min(cfg.batch, N) : N;

    TrainResult res;
    Vec theta = model.params();
    Adam opt(theta.size(), cfg.adam);
    Vec g;
    std::vector<long> perm(static_cast<std::size_t>(N));
    std::iota(perm.begin(), perm.end(), 0L);
    long cursor = N;
    long epoch = 0;
    double best_score = std::numeric_limits<double>::infinity();
    long since_best = 0;

    auto record = [&](long step, double l) {
        MetricsRow row{step, l, relative_errors(model, data)};
        res.history.push_back(row);
        res.min_e_g_fwd = std::min(res.min_e_g_fwd, row.m.e_g_fwd);
        res.min_e_g_inv = std::min(res.min_e_g_inv, row.m.e_g_inv);
        double score = row.m.e_g_fwd + row.m.e_g_inv;
        if (score < best_score) {
            best_score = score;
            res.best_model = model;
            res.best_step = step;
            res.best = row.m;
            since_best = 0;
        } else {
            ++since_best;
        }
    };

    record(0, loss(model, data.u_train, data.y_train, cfg.c0, data.w_u, data.w_y));
    Mat Ub, Yb;
    for (long step = 1; step <= cfg.max_steps; ++step) {
        double l;
        if (B == N) {
            l = loss_and_grad(model, data.u_train, data.y_train, cfg.c0, data.w_u, data.w_y, &g);
        } else {
            if (cursor + B > N) {
                CounterRng rng(cfg.seed ^ 0xBA7C4ULL, static_cast<std::uint64_t>(epoch++));
                for (long i = N - 1; i > 0; --i) std::swap(perm[i], perm[rng.next_u64() % (i + 1)]);
                cursor = 0;
            }
            Ub.resize(data.u_train.rows(), B);
            Yb.resize(data.y_train.rows(), B);
            for (long k = 0; k < B; ++k) {
                Ub.col(k) = data.u_train.col(perm[cursor + k]);
                Yb.col(k) = data.y_train.col(perm[cursor + k]);
            }
            cursor += B;
            l = loss_and_grad(model, Ub, Yb, cfg.c0, data.w_u, data.w_y, &g);
        }
        if (!std::isfinite(l) || !g.allFinite())
            throw Error("train: loss diverged at step " + std::to_string(step));
        opt.step(theta, g);
        if (!theta.allFinite()) throw Error("train: non-finite parameters at step " + std::to_string(step));
        model.set_params(theta);
        res.steps = step;
        if (step % cfg.record_every == 0 || step == cfg.max_steps) {
            record(step, loss(model, data.u_train, data.y_train, cfg.c0, data.w_u, data.w_y));
            if (cfg.early_stop_window > 0 && since_best >= cfg.early_stop_window) break;
        }
    }
    res.final_model = std::move(model);
    return res;
}

// manifest {"architecture","cfg","step","param_count","param_file","dtype"} + <stem>.bin
inline void save_checkpoint(const std::filesystem::path& manifest, const CouplingINN& model, const TrainConfig& cfg,
                            long step) {
    auto blob = io::blob_path(manifest);
    Vec p = model.params();
    io::write_f64_file(blob, std::vector<double>(p.data(), p.data() + p.size()));
    const auto& a = model.config();
    nlohmann::json j{{"architecture",
                      {{"kind", "affine_coupling"},
                       {"dim", a.dim},
                       {"blocks", a.blocks},
                       {"hidden", a.hidden},
                       {"s_max", a.s_max},
                       {"subnet_widths", {a.dim / 2, a.hidden, a.hidden, a.hidden, a.dim / 2}}}},
                     {"cfg", cfg.to_json()},
                     {"step", step},
                     {"param_count", model.param_count()},
                     {"param_file", blob.filename().string()},
                     {"dtype", "f64le"}};
    io::write_json(manifest, j);
}

struct Checkpoint {
    CouplingINN model;
    TrainConfig cfg;
    long step = 0;
};

inline Checkpoint load_checkpoint(const std::filesystem::path& manifest) {
    auto j = io::read_json(manifest);
    require(j.value("dtype", "f64le") == "f64le", "checkpoint: unsupported dtype");
    const auto& a = j.at("architecture");
    CouplingINN::Config arch;
    arch.dim = a.at("dim");
    arch.blocks = a.at("blocks");
    arch.hidden = a.at("hidden");
    arch.s_max = a.at("s_max");
    Checkpoint c;
    c.model = CouplingINN(arch);
    c.cfg = TrainConfig::from_json(j.at("cfg"));
    c.step = j.at("step");
    auto p = io::read_f64_file(manifest.parent_path() / j.at("param_file").get<std::string>());
    require(p.size() == c.model.param_count(), "checkpoint: parameter blob has wrong length");
    c.model.set_params(Eigen::Map<const Vec>(p.data(), static_cast<Eigen::Index>(p.size())));
    return c;
}

// Plain fully connected baseline, one net per direction.
struct FnnBaseline {
    Mlp fwd, inv;
    Metrics best;
};

inline FnnBaseline train_fnn(const PipelineData& data, int hidden, long steps, double lr, std::uint64_t seed,
                             long record_every = 200) {
    const int D = static_cast<int>(data.u_train.rows());
    std::vector<int> widths{D, hidden, hidden, hidden, hidden, D};
    FnnBaseline out;
    out.best.e_g_fwd = out.best.e_g_inv = std::numeric_limits<double>::infinity();

    auto run = [&](Mlp& net, const Mat& X, const Mat& T, const Mat& Xt, const Mat& Tt, const Vec& w,
                   std::uint64_t s, double& best_g, double& best_a) {
        std::mt19937_64 rng(s);
        net = Mlp(widths);
        net.init_glorot(rng);
        Vec theta(net.param_count());
        net.pack(theta.data());
        Adam opt(theta.size(), AdamConfig{lr});
        Mlp grad(widths);
        for (long step = 1; step <= steps; ++step) {
            Mlp::Cache c;
            Mat r = (net.forward(X, &c) - T).array().colwise() * w.array();
            grad.zero();
            net.backward(c, r.array().colwise() * w.array(), &grad);
            Vec g(theta.size());
            grad.pack(g.data());
            opt.step(theta, g);
            net.unpack(theta.data());
            if (step % record_every == 0 || step == steps) {
                double eg = relative_error(Tt, net.forward(Xt), w);
                if (eg < best_g) {
                    best_g = eg;
                    best_a = relative_error(T, net.forward(X), w);
                }
            }
        }
    };
    run(out.fwd, data.u_train, data.y_train, data.u_test, data.y_test, data.w_y, seed, out.best.e_g_fwd,
        out.best.e_a_fwd);
    run(out.inv, data.y_train, data.u_train, data.y_test, data.u_test, data.w_u, seed + 1, out.best.e_g_inv,
        out.best.e_a_inv);
    return out;
}

}  // namespace binn
