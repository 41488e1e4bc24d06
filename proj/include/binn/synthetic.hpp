#pragma once

#include "binn/linalg.hpp"
#include "binn/rng.hpp"

#include <functional>
#include <numbers>

namespace binn {

// Known map with analytic Jacobian, used to drive the construction in tests.
struct TrueMap {
    int d = 2;
    std::function<Vec(const Vec&)> f;
    std::function<Mat(const Vec&)> jac;
};

// F(x) = (x1 + 0.3 sin(pi x2), x2 + 0.3 x1)
inline TrueMap rate_map() {
    constexpr double pi = std::numbers::pi;
    TrueMap m;
    m.d = 2;
    m.f = [](const Vec& x) {
        Vec y(2);
        y << x(0) + 0.3 * std::sin(pi * x(1)), x(1) + 0.3 * x(0);
        return y;
    };
    m.jac = [](const Vec& x) {
        Mat J(2, 2);
        J << 1.0, 0.3 * pi * std::cos(pi * x(1)), 0.3, 1.0;
        return J;
    };
    return m;
}

inline TrueMap identity_map(int d) {
    TrueMap m;
    m.d = d;
    m.f = [](const Vec& x) { return x; };
    m.jac = [d](const Vec&) { return Mat::Identity(d, d); };
    return m;
}

// x + a Q sin(pi P x + phi) with ||Q|| ||P|| normalised so ||J - I|| <= amp < 1.
inline TrueMap random_bilipschitz_map(int d, std::uint64_t seed, double amp = 0.2) {
    constexpr double pi = std::numbers::pi;
    CounterRng rng(seed, 0x5EED);
    Mat P(d, d), Q(d, d);
    Vec phi(d);
    for (int i = 0; i < d; ++i) {
        phi(i) = rng.uniform(0.0, 2.0 * pi);
        for (int j = 0; j < d; ++j) {
            P(i, j) = rng.normal();
            Q(i, j) = rng.normal();
        }
    }
    P /= spectral_norm(P);
    Q /= spectral_norm(Q);
    TrueMap m;
    m.d = d;
    m.f = [=](const Vec& x) -> Vec {
        Vec s = (pi * (P * x) + phi).array().sin().matrix();
        return x + (amp / pi) * (Q * s);
    };
    m.jac = [=](const Vec& x) -> Mat {
        Vec c = (pi * (P * x) + phi).array().cos().matrix();
        return Mat::Identity(d, d) + amp * Q * c.asDiagonal() * P;
    };
    return m;
}

struct MapLipschitz {
    double lip = 0.0;
    double lip_inv = 0.0;
};

// Max of ||J|| and ||J^-1|| over a uniform grid of K with `per_axis` points per axis.
inline MapLipschitz sampled_lipschitz(const TrueMap& m, int per_axis = 101) {
    MapLipschitz out;
    long total = 1;
    for (int k = 0; k < m.d; ++k) total *= per_axis;
    Vec x(m.d);
    for (long idx = 0; idx < total; ++idx) {
        long r = idx;
        for (int k = m.d - 1; k >= 0; --k) {
            x(k) = static_cast<double>(r % per_axis) / (per_axis - 1);
            r /= per_axis;
        }
        Mat J = m.jac(x);
        Eigen::JacobiSVD<Mat> svd(J);
        const Vec& s = svd.singularValues();
        out.lip = std::max(out.lip, s(0));
        out.lip_inv = std::max(out.lip_inv, 1.0 / s(s.size() - 1));
    }
    return out;
}

}  // namespace binn
