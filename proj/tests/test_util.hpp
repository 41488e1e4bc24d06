#pragma once

#include "binn/common.hpp"
#include "binn/rng.hpp"

#include <Eigen/SVD>

#include <functional>

namespace binn::test {

inline Mat fd_jacobian(const std::function<Vec(const Vec&)>& f, const Vec& x, double h = 1e-6) {
    Vec y0 = f(x);
    Mat J(y0.size(), x.size());
    for (Eigen::Index k = 0; k < x.size(); ++k) {
        Vec a = x, b = x;
        a(k) += h;
        b(k) -= h;
        J.col(k) = (f(a) - f(b)) / (2.0 * h);
    }
    return J;
}

inline double svd_norm(const Mat& J) {
    Eigen::JacobiSVD<Mat> svd(J);
    return svd.singularValues()(0);
}

inline Vec uniform_vec(CounterRng& rng, Eigen::Index n, double lo, double hi) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(lo, hi);
    return v;
}

}  // namespace binn::test
