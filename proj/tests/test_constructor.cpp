#include "binn/constructor.hpp"
#include "binn/linalg.hpp"
#include "binn/synthetic.hpp"
#include "binn/verify.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <set>

using namespace binn;

namespace {

GridDataset identity_grid(int d, int n) { return GridDataset::from_function(d, n, identity_map(d).f); }

GridDataset warped_grid(int d, int n, std::uint64_t seed) {
    return GridDataset::from_function(d, n, random_bilipschitz_map(d, seed).f);
}

}  // namespace

TEST(Grid, LayoutAndValidation) {
    GridDataset g = identity_grid(2, 3);
    EXPECT_EQ(g.count(), 9);
    EXPECT_DOUBLE_EQ(g.X(0, 5), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(g.X(1, 5), 2.0 / 3.0);
    auto j = g.to_json();
    GridDataset back = GridDataset::from_json(nlohmann::json::parse(j.dump()));
    EXPECT_EQ(back.Y, g.Y);
    j["y"][0] = nullptr;
    EXPECT_ANY_THROW(GridDataset::from_json(j));
    nlohmann::json short_y{{"d", 2}, {"n", 2}, {"y", {1.0, 2.0}}};
    EXPECT_THROW(GridDataset::from_json(short_y), Error);
}

TEST(Eta, LastComponentsSpacedByOneOverN) {
    GridDataset g = identity_grid(2, 2);
    Mat Z = detail::apply_layers({build_eta(2, 2)}, g.X);
    std::vector<double> last;
    for (long i = 0; i < Z.cols(); ++i) last.push_back(Z(1, i));
    std::sort(last.begin(), last.end());
    std::vector<double> expect{0.0, 0.25, 0.5, 0.75};
    for (int i = 0; i < 4; ++i) EXPECT_NEAR(last[static_cast<std::size_t>(i)], expect[static_cast<std::size_t>(i)], 1e-15);
    EXPECT_DOUBLE_EQ(build_eta(2, 2).bound(), 2.0);
    for (long i = 0; i < Z.cols(); ++i) EXPECT_EQ(Z(0, i), g.X(0, i));

    for (int d : {2, 3})
        for (int n : {3, 5}) {
            GridDataset h = identity_grid(d, n);
            Mat W = detail::apply_layers({build_eta(n, d)}, h.X);
            Vec v = W.row(d - 1).transpose();
            std::sort(v.data(), v.data() + v.size());
            for (Eigen::Index k = 1; k < v.size(); ++k) EXPECT_NEAR(v(k) - v(k - 1), 1.0 / h.count(), 1e-12);
        }
}

TEST(Phi, TransportsLeadingCoordinatesExactly) {
    GridDataset g = warped_grid(3, 3, 5);
    Mat Z = detail::apply_layers({build_eta(3, 3)}, g.X);
    auto phi = build_phi_stage(Z, g.Y);
    ASSERT_EQ(static_cast<long>(phi.size()), g.count());
    Mat P = detail::apply_layers(phi, Z);
    const double N = static_cast<double>(g.count());
    for (long i = 0; i < g.count(); ++i) {
        EXPECT_EQ(P(0, i), g.Y(0, i));
        EXPECT_EQ(P(1, i), g.Y(1, i));
        EXPECT_EQ(P(2, i), Z(2, i));
        const auto& t = std::get<LocalizedTranslate>(phi[static_cast<std::size_t>(i)]);
        EXPECT_NEAR(t.bound(), 1.0 + 6.0 * N * (g.Y.col(i) - Z.col(i)).head(2).norm(), 1e-12);
    }
}

TEST(Phi, CollisionNamesThePair) {
    Mat Z(2, 3);
    Z << 0.1, 0.2, 0.3, 0.5, 0.5, 0.0;
    try {
        build_phi_stage(Z, Z);
        FAIL() << "expected an error";
    } catch (const Error& e) {
        std::string msg = e.what();
        EXPECT_NE(msg.find("points 0 and 1"), std::string::npos) << msg;
    }
}

TEST(Phi, DisjointLayersCommute) {
    GridDataset g = warped_grid(2, 4, 9);
    Mat Z = detail::apply_layers({build_eta(4, 2)}, g.X);
    auto phi = build_phi_stage(Z, g.Y);
    auto rev = phi;
    std::reverse(rev.begin(), rev.end());
    auto shuffled = phi;
    std::rotate(shuffled.begin(), shuffled.begin() + 5, shuffled.end());
    CounterRng rng(4, 0);
    for (int i = 0; i < 1000; ++i) {
        Vec x = test::uniform_vec(rng, 2, -0.2, 1.2);
        Vec a = x, b = x, c = x;
        for (const auto& l : phi) a = layer_forward(l, a);
        for (const auto& l : rev) b = layer_forward(l, b);
        for (const auto& l : shuffled) c = layer_forward(l, c);
        EXPECT_LE((a - b).norm(), 1e-12);
        EXPECT_LE((a - c).norm(), 1e-12);
    }
}

TEST(TildeEta, ShortcutWhenAlreadySeparated) {
    Mat Z(2, 3);
    Z << 0.1, 0.4, 0.9, 0.0, 1.0 / 3.0, 2.0 / 3.0;
    TildeEtaResult r = build_tilde_eta(Z, 0.1);
    EXPECT_TRUE(r.shortcut);
    EXPECT_TRUE(r.layers.empty());
    EXPECT_EQ(r.j0, 0);
    EXPECT_NEAR(r.delta_j0, 0.3, 1e-15);
}

TEST(TildeEta, GreedyCoverSeparatesAndKeepsOtherCoordinates) {
    // All first coordinates equal: no shortcut.
    const long N = 9;
    Mat Z(3, N);
    for (long i = 0; i < N; ++i) {
        Z(0, i) = 0.5;
        Z(1, i) = 0.25 * static_cast<double>(i % 3);
        Z(2, i) = static_cast<double>(i) / N;
    }
    const double eps = 0.2;
    TildeEtaResult r = build_tilde_eta(Z, eps);
    EXPECT_FALSE(r.shortcut);
    EXPECT_EQ(r.j0, 0);
    ASSERT_EQ(static_cast<long>(r.layers.size()), N);
    Mat W = detail::apply_layers(r.layers, Z);
    EXPECT_GE(detail::min_gap(W.row(0).transpose()).gap, eps / N - 1e-12);
    for (long i = 0; i < N; ++i) {
        EXPECT_EQ(W(1, i), Z(1, i));
        EXPECT_EQ(W(2, i), Z(2, i));
        EXPECT_LE(std::abs(W(0, i) - Z(0, i)), eps + 1e-15);
    }
    for (const auto& l : r.layers) EXPECT_NEAR(layer_bound(l), 1.0 + 2.0 * N * eps, 1e-12);
}

TEST(TildeEta, TwoPointAnchorRule) {
    Vec a(3), b(3);
    a << 0.1, 0.2, 0.3;
    b << 0.5, 0.9, 0.3;
    EXPECT_EQ(choose_two_point_anchor(a, b, 0.1), 1);
    b(1) = 0.2;
    EXPECT_EQ(choose_two_point_anchor(a, b, 0.1), 0);
    b(0) = 0.1;
    EXPECT_THROW(choose_two_point_anchor(a, b, 0.1), Error);
}

TEST(TildePhi, LastCoordinateExactAndLocal) {
    GridDataset g = warped_grid(2, 4, 3);
    ConstructedMap m = construct_f_nn(g, 0.25);
    for (long i = 0; i < g.count(); ++i) EXPECT_NEAR(m.forward_tilde(g.X.col(i))(1), g.Y(1, i), 1e-14);
    // Each last-coordinate layer is the identity once the gate coordinate leaves its window.
    for (std::size_t k = 0; k < m.stages.size(); ++k) {
        const auto* l = std::get_if<LocalizedLast>(&m.stages[k]);
        if (!l) continue;
        Vec z(2);
        z(l->gate) = l->center + 0.5 * l->delta + 1e-9;
        z(1 - l->gate) = 0.3;
        EXPECT_EQ(l->forward(z), z);
        z(l->gate) = l->center - 0.5 * l->delta - 1e-9;
        EXPECT_EQ(l->forward(z), z);
    }
}

TEST(Construct, IdentityTwoByTwo) {
    GridDataset g = identity_grid(2, 2);
    ConstructedMap m = construct_f_nn(g, 0.5);
    EXPECT_LE(max_interpolation_residual(m, g), 0.5);
    EXPECT_DOUBLE_EQ(m.certificate.c, 0.5);
    EXPECT_EQ(m.counts.eta, 1);
    EXPECT_EQ(m.counts.phi, 4);
    EXPECT_EQ(m.counts.tilde_phi, 4);
    EXPECT_EQ(m.counts.total(), static_cast<long>(m.stages.size()));
}

TEST(Construct, CertificateMatchesClosedForm) {
    for (int n : {2, 3}) {
        GridDataset g = identity_grid(2, n);
        const double eps = 1.0 / n;
        ConstructedMap m = construct_f_nn(g, eps);
        ASSERT_FALSE(m.shortcut);
        const double N = static_cast<double>(g.count()), c = m.certificate.c;
        const double expect = (n / (n - 1.0)) * (1 + 6 * N * c) * (1 + 2 * N * eps) * (1 + 6 * N * c / eps);
        EXPECT_NEAR(m.certificate.product_forward, expect, 1e-12 * expect);
        EXPECT_NEAR(m.certificate.product_inverse, expect, 1e-12 * expect);
        double prod = 1.0;
        for (const auto& s : m.certificate.stages) prod *= s.forward;
        EXPECT_NEAR(prod, m.certificate.product_forward, 1e-12 * prod);
    }
}

TEST(Construct, ResidualBelowEpsAcrossCases) {
    for (int d : {2, 3})
        for (int n : {2, 4})
            for (std::uint64_t seed : {1u, 2u}) {
                GridDataset g = warped_grid(d, n, seed);
                const double eps = 1.0 / n;
                ConstructedMap m = construct_f_nn(g, eps);
                EXPECT_LT(max_interpolation_residual(m, g), eps) << d << " " << n << " " << seed;
            }
}

TEST(Construct, GlobalBijectivity) {
    GridDataset g = warped_grid(2, 4, 7);
    ConstructedMap m = construct_f_nn(g, 0.25);
    auto probes = random_probes(2, 1000, 3, -0.5, 1.5);
    for (const auto& x : probes) EXPECT_LE((m.inverse_tilde(m.forward_tilde(x)) - x).lpNorm<Eigen::Infinity>(), 1e-9);
}

TEST(Construct, EmpiricalRatiosUnderCertificate) {
    GridDataset g = warped_grid(2, 3, 8);
    ConstructedMap m = construct_f_nn(g, 1.0 / 3.0);
    auto base = certificate_probes(g, 500, 5, 0.5 / 3.0);
    double rf = max_local_ratio([&](const Vec& x) { return m.forward_tilde(x); }, base, 10000, 1, 0.05);
    std::vector<Vec> ybase;
    for (const auto& x : base) ybase.push_back(m.forward_tilde(x));
    double ri = max_local_ratio([&](const Vec& y) { return m.inverse_tilde(y); }, ybase, 10000, 2, 0.05);
    EXPECT_LE(rf, m.certificate.product_forward);
    EXPECT_LE(ri, m.certificate.product_inverse);
    EXPECT_GT(rf, 1.0);
}

TEST(Construct, JsonRoundTrip) {
    GridDataset g = warped_grid(2, 3, 2);
    ConstructedMap m = compose_with_Hr(construct_f_nn(g, 0.3), 0.7);
    ConstructedMap back = ConstructedMap::from_json(nlohmann::json::parse(m.to_json().dump()));
    ASSERT_TRUE(back.r().has_value());
    EXPECT_EQ(*back.r(), 0.7);
    EXPECT_EQ(back.certificate.product_forward, m.certificate.product_forward);
    CounterRng rng(1, 0);
    for (int i = 0; i < 50; ++i) {
        Vec x = test::uniform_vec(rng, 2, 0.0, 1.0);
        EXPECT_EQ(back.forward(x), m.forward(x));
    }
}

TEST(Hr, ComposedMapKeepsGridValuesAndInverts) {
    GridDataset g = warped_grid(2, 4, 4);
    ConstructedMap m0 = construct_f_nn(g, 0.25);
    ConstructedMap m = compose_with_Hr(m0, 0.8);
    for (long i = 0; i < g.count(); ++i) EXPECT_EQ(m.forward(g.X.col(i)), m0.forward_tilde(g.X.col(i)));
    auto probes = random_probes(2, 1000, 9);
    for (const auto& x : probes) EXPECT_LE((m.exact_inverse(m.forward(x)) - x).norm(), 1e-9);
    Vec mid = Vec::Constant(2, 0.375);
    Vec y = m.forward(mid);
    EXPECT_GT((m.mirrored_inverse(y) - m.exact_inverse(y)).norm(), 1e-3);
}

TEST(ChooseR, WorkedExample) {
    // Lipschitz sums of 10 in both directions, n = 10, d = 2.
    double r = choose_r(9.0, 9.0, 1.0, 1.0, 10, 2);
    EXPECT_NEAR(r, std::sqrt(0.99), 1e-15);
    EXPECT_NEAR(r, 0.994987, 1e-6);
}

TEST(ChooseR, MonotoneAndClamped) {
    double prev = 0.0;
    for (double s : {2.0, 5.0, 50.0, 500.0, 5e4}) {
        double r = choose_r(s, s, 1.0, 1.0, 4, 2);
        EXPECT_GE(r, prev);
        EXPECT_GT(r, 0.0);
        EXPECT_LT(r, 1.0);
        prev = r;
    }
    EXPECT_LE(choose_r(1e30, 1e30, 1.0, 1.0, 4, 2), 1.0 - 1e-12);
    EXPECT_THROW(choose_r(0.2, 0.2, 0.2, 0.2, 4, 2), Error);
}

TEST(ErrorBound, WorkedExampleAndScaling) {
    ErrorBounds b = theoretical_error_bound(1.0, 1.0, 10, 2, 1.0);
    EXPECT_NEAR(b.forward, 0.22, 1e-15);
    // Inverse constant carries the Lip^d prefactor.
    ErrorBounds b2 = theoretical_error_bound(2.0, 1.0, 10, 2, 1.0);
    EXPECT_NEAR(b2.inverse, 2.0 * 4.0 * ((2.0 * 16.0 + 1.0) * 2 + 2.0 + 6.0) * 0.01, 1e-12);
    for (int n : {3, 7, 20}) {
        ErrorBounds a = theoretical_error_bound(1.3, 1.7, n, 3, 0.5);
        ErrorBounds c = theoretical_error_bound(1.3, 1.7, 2 * n, 3, 0.5);
        EXPECT_NEAR(c.forward, a.forward / 4.0, 1e-12 * a.forward);
        EXPECT_NEAR(c.inverse, a.inverse / 4.0, 1e-12 * a.inverse);
    }
}

TEST(EmpiricalError, DeterministicAndThreadIndependent) {
    TrueMap F = rate_map();
    GridDataset g = GridDataset::from_function(2, 4, F.f);
    ConstructedMap m = compose_with_Hr(construct_f_nn(g, 0.25), 0.9);
    double a = empirical_l2_error(m, F, 2000, 5, 1);
    double b = empirical_l2_error(m, F, 2000, 5, 1);
    double c = empirical_l2_error(m, F, 2000, 5, 3);
    EXPECT_EQ(a, b);
    EXPECT_EQ(a, c);
    EXPECT_THROW(empirical_l2_error(m, F, 50, 5), Error);
}

TEST(EmpiricalError, IdentityDataDecaysQuadratically) {
    TrueMap F = identity_map(2);
    std::vector<double> ns, es;
    for (int n : {4, 8, 16}) {
        GridDataset g = GridDataset::from_function(2, n, F.f);
        ConstructedMap m = construct_f_nn(g, 1.0 / n);
        double e = empirical_l2_error(m, F, 4000, 2);
        EXPECT_LE(e, theoretical_error_bound(1.0, 1.0, n, 2, 1.0).forward);
        ns.push_back(std::log(n));
        es.push_back(std::log(e));
    }
    double slope = fit_slope(ns, es);
    EXPECT_LT(slope, -1.6);
    EXPECT_GT(slope, -2.4);
}

TEST(RateStudy, BoundsDominateAndCsvShape) {
    RateStudy st = rate_study(rate_map(), {4, 8, 16}, 1.0, 3000, 7);
    ASSERT_EQ(st.rows.size(), 3u);
    for (const auto& r : st.rows) {
        EXPECT_LE(r.err_fwd, r.bound_fwd);
        EXPECT_LE(r.err_inv, r.bound_inv);
        EXPECT_GT(r.r, 0.0);
        EXPECT_LT(r.r, 1.0);
        EXPECT_LT(r.residual, 1.0 / r.n);
    }
    for (std::size_t i = 1; i < st.rows.size(); ++i)
        EXPECT_NEAR(st.rows[i].bound_fwd, st.rows[i - 1].bound_fwd / 2.0, 1e-12 * st.rows[i].bound_fwd);
    std::string csv = st.csv();
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "n,err_fwd,err_inv,bound_fwd,bound_inv,slope");
    EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
    EXPECT_THROW(rate_study(rate_map(), {4, 8}, 1.0, 3000, 7), Error);
    EXPECT_THROW(rate_study(rate_map(), {8, 4, 16}, 1.0, 3000, 7), Error);
}
