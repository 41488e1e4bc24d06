#pragma once

#include "binn/grid.hpp"
#include "binn/invertible_map.hpp"
#include "binn/linalg.hpp"
#include "binn/parallel.hpp"
#include "binn/rng.hpp"
#include "binn/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace binn {

struct StageBound {
    std::string stage;
    double forward = 1.0;
    double inverse = 1.0;
};

struct LipschitzCertificate {
    std::vector<StageBound> stages;
    double c = 0.0;
    double epsilon = 0.0;
    double product_forward = 1.0;
    double product_inverse = 1.0;

    void add(std::string stage, double fwd, double inv) {
        stages.push_back({std::move(stage), fwd, inv});
        product_forward *= fwd;
        product_inverse *= inv;
    }

    json to_json() const {
        json s = json::array();
        for (const auto& b : stages) s.push_back({{"stage", b.stage}, {"forward", b.forward}, {"inverse", b.inverse}});
        return {{"stages", s},
                {"c", c},
                {"epsilon", epsilon},
                {"product_forward", product_forward},
                {"product_inverse", product_inverse}};
    }

    static LipschitzCertificate from_json(const json& j) {
        LipschitzCertificate out;
        out.c = j.at("c");
        out.epsilon = j.at("epsilon");
        for (const auto& s : j.at("stages")) out.add(s.at("stage"), s.at("forward"), s.at("inverse"));
        return out;
    }
};

struct LayerCounts {
    long eta = 0, phi = 0, tilde_eta = 0, tilde_phi = 0;
    long total() const { return eta + phi + tilde_eta + tilde_phi; }
};

namespace detail {

inline Mat apply_layers(const std::vector<FlowLayer>& layers, const Mat& Z) {
    Mat out = Z;
    for (Eigen::Index i = 0; i < Z.cols(); ++i) {
        Vec z = Z.col(i);
        for (const auto& l : layers) z = layer_forward(l, z);
        out.col(i) = z;
    }
    return out;
}

struct Gap {
    double gap = std::numeric_limits<double>::infinity();
    long a = -1, b = -1;  // closest pair
};

// Minimal pairwise distance of the values; 0 when two agree within kDistinctTol.
inline Gap min_gap(const Vec& v) {
    std::vector<long> idx(static_cast<std::size_t>(v.size()));
    std::iota(idx.begin(), idx.end(), 0L);
    std::stable_sort(idx.begin(), idx.end(), [&](long a, long b) { return v(a) < v(b); });
    Gap g;
    for (std::size_t k = 1; k < idx.size(); ++k) {
        double d = v(idx[k]) - v(idx[k - 1]);
        if (d < g.gap) g = {d, idx[k - 1], idx[k]};
    }
    if (g.gap <= kDistinctTol) g.gap = 0.0;
    return g;
}

}  // namespace detail

inline ShiftLast build_eta(int n, int d) {
    require(n >= 2 && d >= 2, "build_eta: need n >= 2 and d >= 2");
    return ShiftLast{n, d, d - 1, false};
}

// One translation per grid point, gated on the last coordinate with half-width 1/(2N).
inline std::vector<FlowLayer> build_phi_stage(const Mat& Z, const Mat& targets) {
    const long N = Z.cols();
    const int d = static_cast<int>(Z.rows());
    auto g = detail::min_gap(Z.row(d - 1).transpose());
    if (N > 1 && g.gap == 0.0)
        throw Error("phi stage: points " + std::to_string(g.a) + " and " + std::to_string(g.b) +
                    " share the last coordinate");
    if (N > 1 && g.gap < 1.0 / N - 1e-12)
        throw Error("phi stage: last-coordinate gap below 1/N between points " + std::to_string(g.a) + " and " +
                    std::to_string(g.b));
    std::vector<FlowLayer> out;
    out.reserve(static_cast<std::size_t>(N));
    for (long i = 0; i < N; ++i) {
        LocalizedTranslate l;
        l.dim = d;
        l.gate = d - 1;
        l.center = Z(d - 1, i);
        l.scale = static_cast<double>(N);
        l.disp = (targets.col(i) - Z.col(i)).head(d - 1);
        out.push_back(l);
    }
    return out;
}

struct TildeEtaResult {
    std::vector<FlowLayer> layers;
    int j0 = 0;
    bool shortcut = false;
    double delta_j0 = 0.0;  // separation handed to the last-coordinate stage
};

// Two-point anchor rule: coordinate 2 (index 1) if the points differ there,
// otherwise the first coordinate separated by at least delta.
inline int choose_two_point_anchor(const Vec& z1, const Vec& z2, double delta) {
    require(z1.size() == z2.size() && z1.size() >= 2, "choose_two_point_anchor: bad dimensions");
    if (std::abs(z1(1) - z2(1)) > kDistinctTol) return 1;
    for (Eigen::Index j = 0; j < z1.size(); ++j)
        if (std::abs(z1(j) - z2(j)) >= delta) return static_cast<int>(j);
    throw Error("choose_two_point_anchor: no coordinate separates the points by delta");
}

inline TildeEtaResult build_tilde_eta(const Mat& Z, double eps) {
    require(eps > 0.0 && eps < 1.0, "tilde eta: eps must lie in (0,1)");
    const long N = Z.cols();
    const int d = static_cast<int>(Z.rows());
    TildeEtaResult res;

    double best = 0.0;
    int best_j = 0;
    for (int j = 0; j < d - 1; ++j) {
        double gj = N > 1 ? detail::min_gap(Z.row(j).transpose()).gap : 1.0;
        if (gj > best) {
            best = gj;
            best_j = j;
        }
    }
    if (best > 0.0) {
        res.j0 = best_j;
        res.shortcut = true;
        res.delta_j0 = best;
        return res;
    }

    res.j0 = 0;
    res.delta_j0 = eps / static_cast<double>(N);
    Vec v = Z.row(res.j0).transpose();
    std::vector<long> order(static_cast<std::size_t>(N));
    std::iota(order.begin(), order.end(), 0L);
    std::stable_sort(order.begin(), order.end(), [&](long a, long b) { return v(a) < v(b); });

    // Greedy cover by closed intervals of length eps; K points in [b, b+eps]
    // go to b + i eps / K.
    Vec target = v;
    std::size_t k = 0;
    while (k < order.size()) {
        const double b = v(order[k]);
        std::size_t e = k;
        while (e < order.size() && v(order[e]) <= b + eps) ++e;
        const double K = static_cast<double>(e - k);
        for (std::size_t i = k; i < e; ++i) target(order[i]) = b + static_cast<double>(i - k) * eps / K;
        k = e;
    }

    const double delta = 1.0 / (2.0 * static_cast<double>(N));
    for (long i = 0; i < N; ++i) {
        LocalizedShift l;
        l.dim = d;
        l.target = res.j0;
        l.anchor = d - 1;
        l.center = Z(d - 1, i);
        l.delta = delta;
        l.shift = target(i) - v(i);
        l.eps = eps;
        res.layers.push_back(l);
    }
    return res;
}

inline std::vector<FlowLayer> build_tilde_phi_stage(const Mat& W, const Vec& targets_last, int j0, double delta) {
    const long N = W.cols();
    const int d = static_cast<int>(W.rows());
    require(delta > 0.0, "tilde phi stage: separation must be positive");
    if (N > 1) {
        auto g = detail::min_gap(W.row(j0).transpose());
        if (g.gap < delta * (1.0 - 1e-9))
            throw Error("tilde phi stage: coordinate " + std::to_string(j0) + " separation " +
                        std::to_string(g.gap) + " below " + std::to_string(delta) + " (points " +
                        std::to_string(g.a) + ", " + std::to_string(g.b) + ")");
    }
    std::vector<FlowLayer> out;
    for (long i = 0; i < N; ++i)
        out.push_back(LocalizedLast{d, j0, W(j0, i), delta, targets_last(i) - W(d - 1, i)});
    return out;
}

// F~ (stages) optionally preceded by H^r.
class ConstructedMap {
public:
    InvertibleMap stages;
    std::optional<PerCoordinatePWL> hr;
    LipschitzCertificate certificate;
    LayerCounts counts;
    int n = 2, d = 2;
    double epsilon = 0.0;
    int j0 = 0;
    bool shortcut = false;
    double delta_j0 = 0.0;

    std::optional<double> r() const {
        if (!hr) return std::nullopt;
        return hr->net.r();
    }

    Vec forward_tilde(const Vec& x) const { return stages.forward(x); }
    Vec inverse_tilde(const Vec& y) const { return stages.inverse(y); }

    Vec forward(const Vec& x) const { return stages.forward(hr ? hr->forward(x) : x); }
    Vec exact_inverse(const Vec& y) const {
        Vec x = stages.inverse(y);
        return hr ? hr->inverse(x) : x;
    }
    Vec mirrored_inverse(const Vec& y) const {
        Vec x = stages.inverse(y);
        return hr ? hr->forward(x) : x;
    }

    InvertibleMap full() const {
        InvertibleMap m;
        if (hr) m.push_back(*hr);
        m.append(stages);
        return m;
    }

    json to_json() const {
        json j{{"kind", "main"},
               {"n", n},
               {"d", d},
               {"epsilon", epsilon},
               {"j0", j0},
               {"shortcut", shortcut},
               {"delta_j0", delta_j0},
               {"layers", stages.to_json()},
               {"certificate", certificate.to_json()},
               {"layer_counts",
                {{"eta", counts.eta},
                 {"phi", counts.phi},
                 {"tilde_eta", counts.tilde_eta},
                 {"tilde_phi", counts.tilde_phi},
                 {"total", counts.total()}}}};
        j["r"] = hr ? json(hr->net.r()) : json(nullptr);
        return j;
    }

    static ConstructedMap from_json(const json& j) {
        require(j.value("kind", "main") == "main", "constructed map: not a main-construction file");
        ConstructedMap m;
        m.n = j.at("n");
        m.d = j.at("d");
        m.epsilon = j.at("epsilon");
        m.j0 = j.at("j0");
        m.shortcut = j.at("shortcut");
        m.delta_j0 = j.at("delta_j0");
        m.stages = InvertibleMap::from_json(j.at("layers"));
        m.certificate = LipschitzCertificate::from_json(j.at("certificate"));
        const auto& c = j.at("layer_counts");
        m.counts = {c.at("eta"), c.at("phi"), c.at("tilde_eta"), c.at("tilde_phi")};
        if (!j.at("r").is_null()) m.hr = PerCoordinatePWL{PwlNet(m.n, j.at("r").get<double>()), m.d};
        return m;
    }
};

inline ConstructedMap construct_f_nn(const GridDataset& data, double eps) {
    data.validate();
    require(eps > 0.0 && eps < 1.0, "construct: eps must lie in (0,1)");
    const int d = data.d, n = data.n;
    const long N = data.count();
    const double Nd = static_cast<double>(N);

    ConstructedMap m;
    m.n = n;
    m.d = d;
    m.epsilon = eps;

    std::vector<FlowLayer> eta{build_eta(n, d)};
    Mat Z = detail::apply_layers(eta, data.X);

    std::vector<FlowLayer> phi;
    try {
        phi = build_phi_stage(Z, data.Y);
    } catch (const Error& e) {
        throw Error(std::string("stage phi: ") + e.what());
    }
    Z = detail::apply_layers(phi, Z);

    TildeEtaResult te = build_tilde_eta(Z, eps);
    Mat W = detail::apply_layers(te.layers, Z);

    std::vector<FlowLayer> tphi;
    try {
        tphi = build_tilde_phi_stage(W, data.Y.row(d - 1).transpose(), te.j0, te.delta_j0);
    } catch (const Error& e) {
        throw Error(std::string("stage tilde_phi: ") + e.what());
    }

    double c = 0.0;
    for (long i = 0; i < N; ++i) c = std::max(c, (data.Y.col(i) - data.X.col(i)).norm());
    c += 1.0 / n;

    m.certificate.c = c;
    m.certificate.epsilon = eps;
    const double f_eta = n / (n - 1.0);
    const double f_phi = 1.0 + 6.0 * Nd * c;
    const double f_teta = te.shortcut ? 1.0 : 1.0 + 2.0 * Nd * eps;
    const double f_tphi = 1.0 + 6.0 * c / te.delta_j0;
    m.certificate.add("eta", f_eta, f_eta);
    m.certificate.add("phi", f_phi, f_phi);
    m.certificate.add("tilde_eta", f_teta, f_teta);
    m.certificate.add("tilde_phi", f_tphi, f_tphi);

    m.j0 = te.j0;
    m.shortcut = te.shortcut;
    m.delta_j0 = te.delta_j0;
    m.counts = {1, static_cast<long>(phi.size()), static_cast<long>(te.layers.size()), static_cast<long>(tphi.size())};

    for (auto& l : eta) m.stages.push_back(std::move(l));
    for (auto& l : phi) m.stages.push_back(std::move(l));
    for (auto& l : te.layers) m.stages.push_back(std::move(l));
    for (auto& l : tphi) m.stages.push_back(std::move(l));
    return m;
}

inline ConstructedMap compose_with_Hr(ConstructedMap m, double r) {
    m.hr = PerCoordinatePWL{PwlNet(m.n, r), m.d};
    return m;
}

inline double max_interpolation_residual(const ConstructedMap& m, const GridDataset& data) {
    double worst = 0.0;
    for (long i = 0; i < data.count(); ++i)
        worst = std::max(worst, (m.forward_tilde(data.X.col(i)) - data.Y.col(i)).norm());
    return worst;
}

// Smallest admissible r for the composed error bound; lip_tilde* are the certificate products.
inline double choose_r(double lip_tilde, double lip_tilde_inv, double lip, double lip_inv, int n, int d) {
    for (double v : {lip_tilde, lip_tilde_inv, lip, lip_inv})
        if (!std::isfinite(v) || v <= 0.0) throw Error("choose_r: Lipschitz inputs must be finite and positive");
    const double s1 = lip_tilde + lip, s2 = lip_tilde_inv + lip_inv;
    if (s1 < 1.0 || s2 < 1.0) throw Error("choose_r: degenerate Lipschitz data (sum below 1)");
    const double t1 = std::pow(1.0 - 1.0 / (s1 * s1), 1.0 / d);
    const double t2 = 1.0 - 1.0 / s2;
    const double t3 = std::pow(1.0 - 1.0 / (static_cast<double>(n) * n), 1.0 / d);
    const double r = std::max({t1, t2, t3});
    return std::min(r, 1.0 - 1e-12);
}

struct ErrorBounds {
    double forward = 0.0;  // squared L2
    double inverse = 0.0;
};

inline ErrorBounds theoretical_error_bound(double lip, double lip_inv, int n, int d, double c_eps) {
    const double n2 = 1.0 / (static_cast<double>(n) * n);
    ErrorBounds b;
    b.forward = 2.0 * ((3.0 + lip * lip) * d + 3.0 * c_eps * c_eps) * n2;
    b.inverse = 2.0 * std::pow(lip, d) * ((2.0 * (2.0 + lip) * (2.0 + lip) + 1.0) * d + 2.0 * lip_inv * c_eps + 6.0) * n2;
    return b;
}

namespace detail {

inline Vec sample_unit_cube(int d, std::uint64_t seed, std::uint64_t index) {
    CounterRng rng(seed, index);
    Vec x(d);
    for (int k = 0; k < d; ++k) x(k) = rng.uniform();
    return x;
}

inline double ordered_mean(const std::vector<double>& v) {
    double s = 0.0;
    for (double t : v) s += t;
    return s / static_cast<double>(v.size());
}

}  // namespace detail

// Monte-Carlo mean of ||F_nn(x) - F(x)||^2 over K.
inline double empirical_l2_error(const ConstructedMap& m, const TrueMap& F, long samples, std::uint64_t seed,
                                 int threads = 1) {
    require(samples >= 100, "empirical_l2_error: need at least 100 samples");
    std::vector<double> e(static_cast<std::size_t>(samples));
    parallel_for(e.size(), threads, [&](std::size_t i) {
        Vec x = detail::sample_unit_cube(m.d, seed, i);
        e[i] = (m.forward(x) - F.f(x)).squaredNorm();
    });
    return detail::ordered_mean(e);
}

// Mean of ||G(F(x)) - x||^2 |det J_F(x)| over K, i.e. ||G - F^-1||^2 over F(K), with G = mirrored_inverse.
inline double empirical_inverse_l2_error(const ConstructedMap& m, const TrueMap& F, long samples, std::uint64_t seed,
                                         int threads = 1) {
    require(samples >= 100, "empirical_inverse_l2_error: need at least 100 samples");
    std::vector<double> e(static_cast<std::size_t>(samples));
    parallel_for(e.size(), threads, [&](std::size_t i) {
        Vec x = detail::sample_unit_cube(m.d, seed, i);
        e[i] = (m.mirrored_inverse(F.f(x)) - x).squaredNorm() * std::abs(F.jac(x).determinant());
    });
    return detail::ordered_mean(e);
}

struct RateRow {
    int n = 0;
    double err_fwd = 0.0;  // root mean squared
    double err_inv = 0.0;
    double bound_fwd = 0.0;  // root of the squared bound
    double bound_inv = 0.0;
    double r = 0.0;
    double residual = 0.0;
};

struct RateStudy {
    std::vector<RateRow> rows;
    double slope = 0.0;
    double slope_inv = 0.0;
    MapLipschitz lipschitz;

    std::string csv() const {
        std::string s = "n,err_fwd,err_inv,bound_fwd,bound_inv,slope\n";
        char buf[256];
        for (const auto& r : rows) {
            std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.n, r.err_fwd, r.err_inv,
                          r.bound_fwd, r.bound_inv, slope);
            s += buf;
        }
        return s;
    }
};

inline RateStudy rate_study(const TrueMap& F, const std::vector<int>& n_list, double c_eps, long samples,
                            std::uint64_t seed, int threads = 1) {
    require(n_list.size() >= 3, "rate_study: need at least three grid sizes");
    for (std::size_t i = 1; i < n_list.size(); ++i) require(n_list[i] > n_list[i - 1], "rate_study: n must increase");
    RateStudy st;
    st.lipschitz = sampled_lipschitz(F);
    std::vector<double> ln, le, lei;
    for (int n : n_list) {
        GridDataset g = GridDataset::from_function(F.d, n, F.f);
        const double eps = c_eps / n;
        ConstructedMap m = construct_f_nn(g, eps);
        const double r = choose_r(m.certificate.product_forward, m.certificate.product_inverse, st.lipschitz.lip,
                                  st.lipschitz.lip_inv, n, F.d);
        m = compose_with_Hr(std::move(m), r);
        RateRow row;
        row.n = n;
        row.r = r;
        row.residual = max_interpolation_residual(m, g);
        row.err_fwd = std::sqrt(empirical_l2_error(m, F, samples, seed, threads));
        row.err_inv = std::sqrt(empirical_inverse_l2_error(m, F, samples, seed, threads));
        ErrorBounds b = theoretical_error_bound(st.lipschitz.lip, st.lipschitz.lip_inv, n, F.d, c_eps);
        row.bound_fwd = std::sqrt(b.forward);
        row.bound_inv = std::sqrt(b.inverse);
        st.rows.push_back(row);
        ln.push_back(std::log(static_cast<double>(n)));
        le.push_back(std::log(row.err_fwd));
        lei.push_back(std::log(row.err_inv));
    }
    st.slope = fit_slope(ln, le);
    st.slope_inv = fit_slope(ln, lei);
    return st;
}

}  // namespace binn
