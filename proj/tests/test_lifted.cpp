#include "binn/lifted.hpp"
#include "binn/synthetic.hpp"
#include "binn/verify.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace binn;

namespace {

GridDataset warped_grid(int d, int n, std::uint64_t seed) {
    return GridDataset::from_function(d, n, random_bilipschitz_map(d, seed).f);
}

}  // namespace

TEST(Lift, LayoutLinearityAndProjection) {
    Lift lift{2};
    Vec x(2);
    x << 0.5, 0.25;
    Vec expect(6);
    expect << 0.5, 0.25, 0, 0, 0, 0.25;
    EXPECT_EQ(lift.forward(x), expect);
    Vec y(2);
    y << -1.0, 3.0;
    EXPECT_LE((lift.forward(2.0 * x + 3.0 * y) - 2.0 * lift.forward(x) - 3.0 * lift.forward(y)).norm(), 1e-15);
    // Projection as a linear map keeps the first block.
    Project proj{2};
    EXPECT_EQ(proj.jacobian(lift.forward(x)) * lift.forward(x), x);
    EXPECT_EQ(lift.inverse(lift.forward(x)), x);
}

TEST(Project, RejectsOffManifold) {
    Project proj{2};
    Vec y(2);
    y << 0.3, 0.6;
    Vec z = proj.inverse(y);
    EXPECT_EQ(proj.forward(z), y);
    z(5) = 1e-6;
    EXPECT_THROW(proj.forward(z), Error);
    z(5) = 1e-10;
    EXPECT_NO_THROW(proj.forward(z));
}

TEST(CopyBlock, DuplicatesAndUndoes) {
    CopyBlock c{2};
    Vec z(6);
    z << 0.2, 0.7, 0, 0, 0, 0.4;
    Vec expect(6);
    expect << 0.2, 0.7, 0, 0.2, 0.7, 0.4;
    EXPECT_EQ(c.forward(z), expect);
    EXPECT_EQ(c.inverse(expect), z);
    EXPECT_NEAR(c.bound(), 1.0 + std::sqrt(2.0), 1e-15);
    EXPECT_NEAR(c.bound(), 2.41421, 1e-5);
    CounterRng rng(2, 0);
    for (int i = 0; i < 100; ++i)
        EXPECT_LE(test::svd_norm(c.jacobian(test::uniform_vec(rng, 6, 0, 1))), c.bound() * (1 + 1e-12));
}

TEST(KillLast, ZeroesGridImagesWithHalfGate) {
    GridDataset g = warped_grid(2, 3, 1);
    LiftedMap m = construct_f_nn_lifted(g);
    auto kills = m.kill_layers();
    ASSERT_EQ(static_cast<long>(kills.size()), g.count());
    for (std::size_t i = 0; i < kills.size(); ++i) {
        const KillLast& k = *kills[i];
        EXPECT_DOUBLE_EQ(k.h(k.center), 0.5);
        EXPECT_EQ(k.forward(k.center)(5), 0.0);
    }
}

TEST(KillLast, FarFieldUnchanged) {
    GridDataset g = warped_grid(2, 3, 1);
    LiftedMap m = construct_f_nn_lifted(g);
    CounterRng rng(3, 0);
    int tested = 0;
    for (int i = 0; i < 5000; ++i) {
        Vec y = test::uniform_vec(rng, 2, -0.5, 1.5);
        Vec z = Vec::Zero(6);
        z.head(2) = y;
        z.segment(3, 2) = y;
        z(5) = rng.uniform();
        bool outside = true;
        for (const auto* k : m.kill_layers())
            if ((y - k->center.head(2)).lpNorm<Eigen::Infinity>() < 0.5 * m.kill_delta) outside = false;
        if (!outside) continue;
        ++tested;
        Vec w = z;
        for (const auto* k : m.kill_layers()) w = k->forward(w);
        EXPECT_EQ(w, z);
    }
    EXPECT_GT(tested, 1000);
}

TEST(KillLast, SampledNormsWithinGateSlopeBound) {
    GridDataset g = warped_grid(2, 3, 1);
    LiftedMap m = construct_f_nn_lifted(g);
    CounterRng rng(4, 0);
    for (const auto* k : m.kill_layers())
        for (int i = 0; i < 200; ++i) {
            Vec z = k->center + test::uniform_vec(rng, 6, -m.kill_delta, m.kill_delta);
            EXPECT_LE(test::svd_norm(k->jacobian(z)), k->sharp_bound() * (1 + 1e-12));
        }
}

TEST(Lifted, IdentityDataCertificate) {
    GridDataset g = GridDataset::from_function(2, 2, identity_map(2).f);
    LiftedMap m = construct_f_nn_lifted(g);
    EXPECT_LE(max_interpolation_residual(m, g), 1e-10);
    EXPECT_DOUBLE_EQ(m.certificate.c, 0.0);
    const double n = 2, d = 2, linv = m.lip_inv_estimate;
    EXPECT_NEAR(linv, 1.0, 1e-12);
    const double expect = (4 * n / (n - 1)) * std::sqrt(d) * (1 + 6 / (linv * n));
    EXPECT_NEAR(m.certificate.product_forward, expect, 1e-12 * expect);
}

TEST(Lifted, ExactInterpolation) {
    for (int d : {2, 3})
        for (int n : {2, 4}) {
            GridDataset g = warped_grid(d, n, 11);
            LiftedMap m = construct_f_nn_lifted(g);
            EXPECT_LE(max_interpolation_residual(m, g), 1e-10) << d << " " << n;
        }
}

TEST(Lifted, StructuralConstraintsAtGridImages) {
    GridDataset g = warped_grid(2, 3, 6);
    LiftedMap m = construct_f_nn_lifted(g);
    const int d = 2;
    for (long i = 0; i < g.count(); ++i) {
        Vec z = g.X.col(i);
        for (std::size_t li = 0; li < m.layers.size(); ++li) {
            const FlowLayer& l = m.layers[li];
            z = layer_forward(l, z);
            if (std::holds_alternative<Lift>(l))
                for (int k = d; k < 2 * d + 1; ++k) EXPECT_EQ(z(k), 0.0);
            if (std::holds_alternative<CopyBlock>(l)) {
                EXPECT_EQ(z.segment(d + 1, d), z.head(d));
                EXPECT_LE((z.head(d) - g.Y.col(i)).norm(), 1e-14);
            }
            if (li + 2 == m.layers.size()) EXPECT_EQ(z(2 * d + 1), 0.0);
        }
    }
}

TEST(Lifted, RoundTripOnLiftedStates) {
    GridDataset g = warped_grid(2, 4, 2);
    LiftedMap m = construct_f_nn_lifted(g);
    InvertibleMap inner = m.inner();
    Lift lift{2};
    for (const auto& x : random_probes(2, 1000, 5)) {
        Vec z = lift.forward(x);
        EXPECT_LE((lift.inverse(inner.inverse(inner.forward(z))) - x).norm(), 1e-9);
    }
    // On the image manifold the full exact inverse recovers the grid inputs.
    for (long i = 0; i < g.count(); ++i) EXPECT_LE((m.inverse(m.forward(g.X.col(i))) - g.X.col(i)).norm(), 1e-9);
}

TEST(Lifted, NonKillLayersRespectBounds) {
    GridDataset g = warped_grid(2, 3, 3);
    LiftedMap m = construct_f_nn_lifted(g);
    std::vector<Vec> states;
    Lift lift{2};
    for (const auto& x : random_probes(2, 300, 8)) states.push_back(lift.forward(x));
    for (const auto& s : per_layer_norms(m.inner(), states)) {
        if (s.kind == "lifted.kill_last") continue;
        EXPECT_TRUE(s.ok) << s.kind << " " << s.norm_at_worst << " " << s.bound_at_worst;
    }
}

TEST(Lifted, JsonAndAccounting) {
    GridDataset g = warped_grid(2, 2, 4);
    LiftedMap m = construct_f_nn_lifted(g);
    auto j = m.to_json();
    EXPECT_EQ(j["layer_counts"]["stated_weight"], 2 + 14 * 4);
    EXPECT_EQ(j["layer_counts"]["stated_added"], 2 + 4 * 4);
    EXPECT_EQ(j["layers"][1]["variant"], "lifted.shift_last");
    LiftedMap back = LiftedMap::from_json(nlohmann::json::parse(j.dump()));
    for (long i = 0; i < g.count(); ++i) EXPECT_EQ(back.forward(g.X.col(i)), m.forward(g.X.col(i)));
}

TEST(Lifted, CoincidentTargetsRejected) {
    Mat Y = Mat::Constant(2, 4, 0.5);
    GridDataset g = GridDataset::from_values(2, 2, Y);
    EXPECT_THROW(construct_f_nn_lifted(g), Error);
}
