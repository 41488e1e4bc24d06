#pragma once

#include "binn/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <vector>

namespace binn {

// Uniform grid x = alpha/n, alpha in {0..n-1}^d, row-major (alpha_1 slowest).
struct GridDataset {
    int d = 2;
    int n = 2;
    Mat X;  // d x N
    Mat Y;  // d x N

    long count() const { return X.cols(); }
    Vec x(long i) const { return X.col(i); }
    Vec y(long i) const { return Y.col(i); }

    static Vec grid_point(int d, int n, long index) {
        Vec x(d);
        for (int k = d - 1; k >= 0; --k) {
            x(k) = static_cast<double>(index % n) / n;
            index /= n;
        }
        return x;
    }

    static long grid_size(int d, int n) {
        long N = 1;
        for (int k = 0; k < d; ++k) N *= n;
        return N;
    }

    static GridDataset from_function(int d, int n, const std::function<Vec(const Vec&)>& F) {
        GridDataset g = empty(d, n);
        for (long i = 0; i < g.count(); ++i) g.Y.col(i) = F(g.X.col(i));
        g.validate();
        return g;
    }

    static GridDataset from_values(int d, int n, const Mat& Y) {
        GridDataset g = empty(d, n);
        require(Y.rows() == d && Y.cols() == g.count(), "GridDataset: y has wrong shape");
        g.Y = Y;
        g.validate();
        return g;
    }

    void validate() const {
        require(d >= 2, "GridDataset: d must be >= 2");
        require(n >= 2, "GridDataset: n must be >= 2");
        require(X.cols() == grid_size(d, n) && Y.cols() == X.cols(), "GridDataset: pair count must be n^d");
        require(Y.allFinite(), "GridDataset: y values must be finite");
    }

    // {"d","n","y": flat row-major N x d}
    nlohmann::json to_json() const {
        std::vector<double> flat;
        flat.reserve(static_cast<std::size_t>(Y.size()));
        for (long i = 0; i < count(); ++i)
            for (int k = 0; k < d; ++k) flat.push_back(Y(k, i));
        return {{"d", d}, {"n", n}, {"y", flat}};
    }

    static GridDataset from_json(const nlohmann::json& j) {
        int d = j.at("d").get<int>();
        int n = j.at("n").get<int>();
        require(d >= 2 && n >= 2, "grid file: d and n must be >= 2");
        auto flat = j.at("y").get<std::vector<double>>();
        long N = grid_size(d, n);
        require(static_cast<long>(flat.size()) == N * d, "grid file: y must hold n^d * d values");
        Mat Y(d, N);
        for (long i = 0; i < N; ++i)
            for (int k = 0; k < d; ++k) Y(k, i) = flat[static_cast<std::size_t>(i * d + k)];
        return from_values(d, n, Y);
    }

private:
    static GridDataset empty(int d, int n) {
        require(d >= 2, "GridDataset: d must be >= 2");
        require(n >= 2, "GridDataset: n must be >= 2");
        GridDataset g;
        g.d = d;
        g.n = n;
        long N = grid_size(d, n);
        g.X.resize(d, N);
        g.Y.resize(d, N);
        for (long i = 0; i < N; ++i) g.X.col(i) = grid_point(d, n, i);
        return g;
    }
};

// Data estimates of Lip(F) and Lip(F^-1) from all grid pairs.
struct DataLipschitz {
    double lip = 0.0;
    double lip_inv = 0.0;
};

inline DataLipschitz estimate_lipschitz(const GridDataset& g) {
    DataLipschitz out;
    for (long a = 0; a < g.count(); ++a) {
        for (long b = a + 1; b < g.count(); ++b) {
            double dx = (g.X.col(a) - g.X.col(b)).norm();
            double dy = (g.Y.col(a) - g.Y.col(b)).norm();
            out.lip = std::max(out.lip, dy / dx);
            out.lip_inv = dy > 0.0 ? std::max(out.lip_inv, dx / dy) : std::numeric_limits<double>::infinity();
        }
    }
    return out;
}

}  // namespace binn
