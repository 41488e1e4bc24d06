#include "binn/adam.hpp"
#include "binn/coupling.hpp"
#include "binn/pipeline.hpp"
#include "binn/train.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <filesystem>

using namespace binn;

namespace {

Mat normal_mat(int rows, long cols, std::uint64_t seed, double scale = 1.0) {
    Mat M(rows, cols);
    for (long j = 0; j < cols; ++j) {
        CounterRng rng(seed, static_cast<std::uint64_t>(j));
        for (int i = 0; i < rows; ++i) M(i, j) = scale * rng.normal();
    }
    return M;
}

PipelineData synthetic_data(std::uint64_t seed) {
    PipelineData d;
    Mat U = normal_mat(10, 60, seed, 0.5);
    Mat Y = U;
    for (long j = 0; j < U.cols(); ++j)
        for (int i = 0; i < 10; ++i) Y(i, j) = U(i, j) + 0.3 * std::sin(U((i + 1) % 10, j));
    d.u_train = U.leftCols(40);
    d.y_train = Y.leftCols(40);
    d.u_test = U.rightCols(20);
    d.y_test = Y.rightCols(20);
    d.w_u = Vec::LinSpaced(10, 1.0, 0.1);
    d.w_u /= d.w_u.sum();
    d.w_y = Vec::Constant(10, 0.1);
    return d;
}

double fd_worst_relative(std::uint64_t seed, int coords) {
    CouplingINN m = CouplingINN::init({}, seed);
    CounterRng r(seed, 99);
    Mat U(10, 20), Y(10, 20);
    for (Eigen::Index i = 0; i < U.size(); ++i) {
        U.data()[i] = r.normal();
        Y.data()[i] = r.normal();
    }
    Vec w(10);
    for (int i = 0; i < 10; ++i) w(i) = 0.05 + r.uniform();
    const double c0 = 0.3;
    Vec g;
    loss_and_grad(m, U, Y, c0, w, w, &g);
    Vec th = m.params();
    double worst = 0.0;
    for (int k = 0; k < coords; ++k) {
        auto i = static_cast<Eigen::Index>(r.next_u64() % static_cast<std::uint64_t>(th.size()));
        const double h = 1e-5;
        Vec tp = th;
        tp(i) += h;
        m.set_params(tp);
        double lp = loss(m, U, Y, c0, w, w);
        tp(i) -= 2 * h;
        m.set_params(tp);
        double lm = loss(m, U, Y, c0, w, w);
        m.set_params(th);
        double fd = (lp - lm) / (2 * h);
        double rel = std::abs(fd - g(i)) / std::max({std::abs(fd), std::abs(g(i)), 1e-6});
        worst = std::max(worst, rel);
    }
    return worst;
}

}  // namespace

TEST(Coupling, InitDeterministicAndCounted) {
    CouplingINN a = CouplingINN::init({}, 5), b = CouplingINN::init({}, 5), c = CouplingINN::init({}, 6);
    EXPECT_EQ(a.params(), b.params());
    EXPECT_NE(a.params(), c.params());
    // Per subnet: (5+1)32 + 2 (32+1)32 + (32+1)5.
    const std::size_t sub = 6 * 32 + 2 * 33 * 32 + 33 * 5;
    EXPECT_EQ(sub, 2469u);
    EXPECT_EQ(a.param_count(), sub * 2 * 3);
    // Glorot bound on the first layer.
    const double lim = std::sqrt(6.0 / (5 + 32));
    EXPECT_LE(a.blocks()[0].scale_net().weight(0).cwiseAbs().maxCoeff(), lim);
    EXPECT_EQ(a.blocks()[0].scale_net().bias(0).norm(), 0.0);
}

TEST(Coupling, ZeroedOutputLayersGiveIdentity) {
    CouplingINN m = CouplingINN::init({}, 3);
    for (auto& b : m.blocks()) {
        b.scale_net().weight(3).setZero();
        b.shift_net().weight(3).setZero();
    }
    Mat U = normal_mat(10, 7, 1);
    EXPECT_EQ(m.forward(U), U);
    EXPECT_EQ(m.inverse(U), U);
}

TEST(Coupling, OddEvenSplit) {
    AffineCouplingBlock b(10, 4);
    Mat U(10, 1);
    for (int i = 0; i < 10; ++i) U(i, 0) = i;
    Mat o = b.odd(U), e = b.even(U);
    for (int k = 0; k < 5; ++k) {
        EXPECT_EQ(o(k, 0), 2 * k);
        EXPECT_EQ(e(k, 0), 2 * k + 1);
    }
    EXPECT_EQ(b.combine(o, e), U);
}

TEST(Coupling, ClampSaturatesAtSMax) {
    CouplingINN::Config cfg;
    cfg.blocks = 1;
    CouplingINN m(cfg);
    m.blocks()[0].scale_net().bias(3).setConstant(100.0);
    Vec u = Vec::LinSpaced(10, -1.0, 1.0);
    Vec y = m.forward(u);
    // First half-step scales the odd entries by exp(5); the second scales the even ones.
    for (int k = 0; k < 5; ++k) {
        EXPECT_NEAR(y(2 * k), u(2 * k) * std::exp(5.0), 1e-12 * std::exp(5.0));
        EXPECT_NEAR(y(2 * k + 1), u(2 * k + 1) * std::exp(5.0), 1e-12 * std::exp(5.0));
    }
    EXPECT_LE((m.inverse(y) - u).norm(), 1e-12);
}

TEST(Coupling, RoundTripUntrainedAndTrained) {
    CouplingINN m = CouplingINN::init({}, 8);
    Mat U = normal_mat(10, 100, 2);
    EXPECT_LE((m.inverse(m.forward(U)) - U).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LE((m.forward(m.inverse(U)) - U).cwiseAbs().maxCoeff(), 1e-6);

    PipelineData d = synthetic_data(4);
    TrainConfig cfg;
    cfg.max_steps = 150;
    cfg.record_every = 50;
    TrainResult r = train(CouplingINN::init(cfg.arch, 1), d, cfg);
    EXPECT_TRUE(r.final_model.params().allFinite());
    EXPECT_LE((r.final_model.inverse(r.final_model.forward(U)) - U).cwiseAbs().maxCoeff(), 1e-6);
}

TEST(Coupling, RejectsBadInput) {
    CouplingINN m = CouplingINN::init({}, 1);
    EXPECT_THROW(m.forward(Vec(Vec::Zero(9))), DimensionError);
    Vec bad = Vec::Zero(10);
    bad(3) = std::nan("");
    EXPECT_THROW(m.forward(bad), Error);
    EXPECT_THROW(AffineCouplingBlock(7, 4), Error);
}

TEST(Coupling, JacobianMatchesFiniteDifferences) {
    CouplingINN::Config cfg;
    cfg.blocks = 1;
    CouplingINN m = CouplingINN::init(cfg, 12);
    const auto& b = m.blocks()[0];
    Vec u = normal_mat(10, 1, 3).col(0);
    Mat fd = test::fd_jacobian([&](const Vec& v) { return b.forward(v); }, u);
    EXPECT_LE((fd - b.jacobian(u)).norm(), 1e-6 * fd.norm());
    Vec y = b.forward(u);
    EXPECT_LE((b.jacobian(u) * b.inverse_jacobian(y) - Mat::Identity(10, 10)).norm(), 1e-10);
}

TEST(Loss, PerfectModelAndForwardOnly) {
    CouplingINN m = CouplingINN::init({}, 2);
    Mat U = normal_mat(10, 30, 3);
    Mat Y = m.forward(U);
    Vec w = Vec::Constant(10, 0.1);
    EXPECT_LE(loss(m, U, Y, 1e-3, w, w), 1e-24);

    Mat Y2 = normal_mat(10, 30, 4);
    Mat ry = (m.forward(U) - Y2).array().colwise() * w.array();
    EXPECT_NEAR(loss(m, U, Y2, 0.0, w, w), 0.5 * ry.squaredNorm(), 1e-12);
}

TEST(Loss, MatchesIndependentRecomputation) {
    CouplingINN m = CouplingINN::init({}, 2);
    Mat U = normal_mat(10, 25, 5), Y = normal_mat(10, 25, 6);
    Vec wu = Vec::LinSpaced(10, 0.2, 0.01), wy = Vec::LinSpaced(10, 0.05, 0.3);
    const double c0 = 1e-3;
    double expect = 0.0;
    for (long j = 0; j < U.cols(); ++j) {
        Vec yp = m.forward(Vec(U.col(j)));
        Vec up = m.inverse(Vec(Y.col(j)));
        for (int i = 0; i < 10; ++i) {
            expect += 0.5 * c0 * std::pow((U(i, j) - up(i)) * wu(i), 2);
            expect += 0.5 * std::pow((Y(i, j) - yp(i)) * wy(i), 2);
        }
    }
    EXPECT_NEAR(loss(m, U, Y, c0, wu, wy), expect, 1e-12 * std::max(1.0, expect));
}

TEST(Loss, PermutationInvariantFullBatch) {
    CouplingINN m = CouplingINN::init({}, 2);
    Mat U = normal_mat(10, 25, 7), Y = normal_mat(10, 25, 8);
    Vec w = Vec::Constant(10, 0.1);
    Eigen::PermutationMatrix<Eigen::Dynamic> P(25);
    P.setIdentity();
    std::reverse(P.indices().data(), P.indices().data() + 25);
    std::swap(P.indices()(3), P.indices()(17));
    EXPECT_NEAR(loss(m, U, Y, 1e-3, w, w), loss(m, U * P, Y * P, 1e-3, w, w), 1e-12);
}

TEST(Gradient, FiniteDifferencesFiveSeeds) {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) EXPECT_LT(fd_worst_relative(seed, 50), 1e-4) << seed;
}

TEST(Gradient, ZeroWeightsAndBatchLinearity) {
    CouplingINN m = CouplingINN::init({}, 4);
    Mat U = normal_mat(10, 30, 9), Y = normal_mat(10, 30, 10);
    Vec w = Vec::Constant(10, 0.1), z = Vec::Zero(10);
    Vec g;
    loss_and_grad(m, U, Y, 1e-3, z, z, &g);
    EXPECT_EQ(g.cwiseAbs().maxCoeff(), 0.0);
    Vec ga, gb, gall;
    loss_and_grad(m, U.leftCols(12), Y.leftCols(12), 1e-3, w, w, &ga);
    loss_and_grad(m, U.rightCols(18), Y.rightCols(18), 1e-3, w, w, &gb);
    loss_and_grad(m, U, Y, 1e-3, w, w, &gall);
    EXPECT_LE((ga + gb - gall).norm(), 1e-12 * std::max(1.0, gall.norm()));
}

TEST(Adam, SingleStepOnQuadratic) {
    Adam opt(1);
    Vec theta = Vec::Ones(1);
    opt.step(theta, theta);  // gradient of theta^2/2
    EXPECT_DOUBLE_EQ(theta(0), 1.0 - 1e-3 / (1.0 + 1e-8));
}

TEST(Metrics, RelativeErrorEndpoints) {
    Mat T = normal_mat(10, 5, 1);
    Vec w = Vec::Constant(10, 0.1);
    EXPECT_EQ(relative_error(T, T, w), 0.0);
    EXPECT_DOUBLE_EQ(relative_error(T, Mat::Zero(10, 5), w), 1.0);
    EXPECT_THROW(relative_error(Mat::Zero(10, 5), T, w), Error);
}

TEST(Train, DeterministicHistories) {
    PipelineData d = synthetic_data(5);
    TrainConfig cfg;
    cfg.max_steps = 60;
    cfg.record_every = 20;
    TrainResult a = train(CouplingINN::init(cfg.arch, 3), d, cfg);
    TrainResult b = train(CouplingINN::init(cfg.arch, 3), d, cfg);
    ASSERT_EQ(a.history.size(), b.history.size());
    EXPECT_EQ(history_csv(a.history), history_csv(b.history));
    EXPECT_EQ(a.final_model.params(), b.final_model.params());
    EXPECT_EQ(history_csv(a.history).substr(0, 41), "step,loss,e_a_fwd,e_g_fwd,e_a_inv,e_g_inv");
}

TEST(Train, InverseTermVanishesWithZeroWeights) {
    PipelineData d = synthetic_data(6);
    d.w_u.setZero();
    TrainConfig a, b;
    a.max_steps = b.max_steps = 10;
    a.record_every = b.record_every = 5;
    a.c0 = 1e-3;
    b.c0 = 1.0;
    // e_a_inv would need a nonzero w_u denominator; compare parameters only.
    d.w_u(0) = 0.0;
    CouplingINN m0 = CouplingINN::init(a.arch, 2);
    Vec theta_a = m0.params(), theta_b = m0.params();
    Adam oa(theta_a.size(), a.adam), ob(theta_b.size(), b.adam);
    CouplingINN ma = m0, mb = m0;
    for (int s = 0; s < 10; ++s) {
        Vec ga, gb;
        loss_and_grad(ma, d.u_train, d.y_train, a.c0, d.w_u, d.w_y, &ga);
        loss_and_grad(mb, d.u_train, d.y_train, b.c0, d.w_u, d.w_y, &gb);
        oa.step(theta_a, ga);
        ob.step(theta_b, gb);
        ma.set_params(theta_a);
        mb.set_params(theta_b);
    }
    EXPECT_EQ(theta_a, theta_b);
}

TEST(Train, MinibatchRunsAndImproves) {
    PipelineData d = synthetic_data(7);
    TrainConfig cfg;
    cfg.max_steps = 200;
    cfg.batch = 16;
    cfg.record_every = 50;
    cfg.adam.lr = 3e-3;
    TrainResult r = train(CouplingINN::init(cfg.arch, 4), d, cfg);
    ASSERT_GE(r.history.size(), 2u);
    EXPECT_LT(r.history.back().loss, r.history.front().loss);
    EXPECT_LE(r.min_e_g_fwd, r.history.front().m.e_g_fwd);
}

TEST(Train, ConfigValidation) {
    TrainConfig cfg;
    cfg.c0 = 0.0;
    EXPECT_THROW(cfg.validate(), Error);
    cfg.c0 = 1e-3;
    cfg.adam.lr = -1.0;
    EXPECT_THROW(cfg.validate(), Error);
    TrainConfig back = TrainConfig::from_json(TrainConfig{}.to_json());
    EXPECT_EQ(back.to_json(), TrainConfig{}.to_json());
}

TEST(Train, SemiConvergenceRule) {
    auto hist = [](std::vector<double> v) {
        std::vector<MetricsRow> h;
        for (std::size_t i = 0; i < v.size(); ++i) {
            MetricsRow r;
            r.step = static_cast<long>(i);
            r.m.e_g_inv = v[i];
            h.push_back(r);
        }
        return h;
    };
    EXPECT_TRUE(semi_converged(hist({0.5, 0.2, 0.1, 0.12})));
    EXPECT_FALSE(semi_converged(hist({0.5, 0.2, 0.1, 0.09})));
    EXPECT_FALSE(semi_converged(hist({0.5, 0.2, 0.1, 0.1005})));
    EXPECT_FALSE(semi_converged(hist({0.5, 0.2})));
}

TEST(Train, CheckpointRoundTrip) {
    auto dir = std::filesystem::temp_directory_path() / "binn_test_ckpt";
    std::filesystem::create_directories(dir);
    TrainConfig cfg;
    cfg.seed = 42;
    CouplingINN m = CouplingINN::init(cfg.arch, 9);
    save_checkpoint(dir / "m.json", m, cfg, 123);
    EXPECT_EQ(std::filesystem::file_size(dir / "m.bin"), m.param_count() * 8);
    Checkpoint c = load_checkpoint(dir / "m.json");
    EXPECT_EQ(c.model.params(), m.params());
    EXPECT_EQ(c.step, 123);
    EXPECT_EQ(c.cfg.seed, 42u);
    std::filesystem::resize_file(dir / "m.bin", 16);
    EXPECT_THROW(load_checkpoint(dir / "m.json"), Error);
    std::filesystem::remove_all(dir);
}

TEST(Train, FnnBaselineProducesFiniteMetrics) {
    PipelineData d = synthetic_data(8);
    FnnBaseline f = train_fnn(d, 16, 100, 1e-3, 3, 50);
    EXPECT_TRUE(std::isfinite(f.best.e_g_fwd));
    EXPECT_TRUE(std::isfinite(f.best.e_g_inv));
    EXPECT_LT(f.best.e_a_fwd, 1.0);
}

TEST(Train, LossDropsOnPdeDataAcrossSeeds) {
    pde::PairDataset ds = pde::generate(150, 31, pde::SolveSpec{}, 1);
    Pipeline p = build_pipeline(ds, 100, 50, 10, InputRepr::Amplitude, 150);
    int dropped = 0;
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        CouplingINN m = CouplingINN::init({}, seed);
        TrainConfig cfg;
        cfg.max_steps = 100;
        cfg.record_every = 100;
        cfg.seed = seed;
        double before = loss(m, p.data.u_train, p.data.y_train, cfg.c0, p.data.w_u, p.data.w_y);
        TrainResult r = train(std::move(m), p.data, cfg);
        double after = loss(r.final_model, p.data.u_train, p.data.y_train, cfg.c0, p.data.w_u, p.data.w_y);
        if (after < before) ++dropped;
    }
    EXPECT_GE(dropped, 10);
}
