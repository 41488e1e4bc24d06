#pragma once

#include "binn/common.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace binn {

// Largest singular value by power iteration on J^T J.
inline double spectral_norm(const Mat& J, int max_iter = 500, double tol = 1e-13) {
    if (J.size() == 0) return 0.0;
    const Mat G = J.transpose() * J;
    Vec v = Vec::Ones(G.cols()) / std::sqrt(static_cast<double>(G.cols()));
    // Break symmetry so a start orthogonal to the top vector is unlikely.
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += 1e-3 * static_cast<double>(i + 1) / v.size();
    v.normalize();
    double lam = 0.0;
    for (int it = 0; it < max_iter; ++it) {
        Vec w = G * v;
        double nw = w.norm();
        if (nw == 0.0) return 0.0;
        w /= nw;
        double next = w.dot(G * w);
        v = w;
        if (std::abs(next - lam) <= tol * std::max(1.0, next)) {
            lam = next;
            break;
        }
        lam = next;
    }
    return std::sqrt(std::max(lam, 0.0));
}

struct EigenPairs {
    Vec values;   // descending
    Mat vectors;  // columns
};

// Cyclic Jacobi for symmetric matrices. Stops once the off-diagonal Frobenius norm
// drops below rel_tol * ||A||_F.
inline EigenPairs jacobi_eigen(const Mat& A_in, double rel_tol = 1e-12, int max_sweeps = 100) {
    require(A_in.rows() == A_in.cols(), "jacobi_eigen: matrix must be square");
    const Eigen::Index n = A_in.rows();
    Mat A = 0.5 * (A_in + A_in.transpose());
    Mat V = Mat::Identity(n, n);
    const double thresh = rel_tol * A.norm();

    auto off = [&]() {
        double s = 0.0;
        for (Eigen::Index j = 0; j < n; ++j)
            for (Eigen::Index i = 0; i < n; ++i)
                if (i != j) s += A(i, j) * A(i, j);
        return std::sqrt(s);
    };

    for (int sweep = 0; sweep < max_sweeps && off() > thresh; ++sweep) {
        for (Eigen::Index p = 0; p < n - 1; ++p) {
            for (Eigen::Index q = p + 1; q < n; ++q) {
                const double apq = A(p, q);
                if (apq == 0.0) continue;
                const double theta = (A(q, q) - A(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                // Column rotation, then mirror: A stays symmetric, so rows p and q
                // follow from the rotated columns except for the 2x2 pivot block.
                const double app = A(p, p), aqq = A(q, q);
                double* cp = A.col(p).data();
                double* cq = A.col(q).data();
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double akp = cp[k], akq = cq[k];
                    cp[k] = c * akp - s * akq;
                    cq[k] = s * akp + c * akq;
                }
                cp[p] = app - t * apq;
                cq[q] = aqq + t * apq;
                cp[q] = 0.0;
                cq[p] = 0.0;
                for (Eigen::Index k = 0; k < n; ++k) {
                    A(p, k) = cp[k];
                    A(q, k) = cq[k];
                }
                for (Eigen::Index k = 0; k < n; ++k) {
                    const double vkp = V(k, p), vkq = V(k, q);
                    V(k, p) = c * vkp - s * vkq;
                    V(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<Eigen::Index> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return A(a, a) > A(b, b); });
    EigenPairs out{Vec(n), Mat(n, n)};
    for (Eigen::Index k = 0; k < n; ++k) {
        out.values(k) = A(idx[k], idx[k]);
        out.vectors.col(k) = V.col(idx[k]);
    }
    return out;
}

// Flip each column so its first component above tol is positive.
inline void fix_signs(Mat& vecs, double tol = 1e-12) {
    for (Eigen::Index k = 0; k < vecs.cols(); ++k) {
        for (Eigen::Index i = 0; i < vecs.rows(); ++i) {
            if (std::abs(vecs(i, k)) > tol) {
                if (vecs(i, k) < 0.0) vecs.col(k) *= -1.0;
                break;
            }
        }
    }
}

// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
    require(x.size() == y.size() && x.size() >= 2, "fit_slope: need two or more points");
    const double n = static_cast<double>(x.size());
    double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
    }
    return sxy / sxx;
}

}  // namespace binn
