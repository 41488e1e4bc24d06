#pragma once

#include "binn/io.hpp"
#include "binn/parallel.hpp"
#include "binn/rng.hpp"

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>

#include <numbers>
#include <vector>

namespace binn::pde {

inline constexpr int kModes = 20;
inline constexpr int kXiDim = kModes * kModes;

// xi(i-1, j-1) multiplies cos(i pi x1) cos(j pi x2) / (i^3 + j^3).
struct KLCoefficient {
    Mat xi = Mat::Zero(kModes, kModes);

    static double weight(int i, int j) { return 1.0 / (i * i * i + j * j * j); }

    double operator()(double x1, double x2) const {
        constexpr double pi = std::numbers::pi;
        double s = 2.0;
        for (int i = 1; i <= kModes; ++i) {
            double ci = std::cos(i * pi * x1);
            for (int j = 1; j <= kModes; ++j) s += xi(i - 1, j - 1) * weight(i, j) * ci * std::cos(j * pi * x2);
        }
        return s;
    }

    // Row-major flattening, i slowest.
    Vec flat() const {
        Vec v(kXiDim);
        for (int i = 0; i < kModes; ++i)
            for (int j = 0; j < kModes; ++j) v(i * kModes + j) = xi(i, j);
        return v;
    }

    static KLCoefficient from_flat(const Vec& v) {
        require(v.size() == kXiDim, "KLCoefficient: expected 400 values");
        KLCoefficient c;
        for (int i = 0; i < kModes; ++i)
            for (int j = 0; j < kModes; ++j) c.xi(i, j) = v(i * kModes + j);
        return c;
    }
};

// Flattened xi -> amplitudes xi_ij / (i^3 + j^3); columns are samples.
inline Mat amplitudes(const Mat& xi) {
    require(xi.rows() == kXiDim, "amplitudes: expected 400 rows");
    Mat a = xi;
    for (int i = 0; i < kModes; ++i)
        for (int j = 0; j < kModes; ++j) a.row(i * kModes + j) *= KLCoefficient::weight(i + 1, j + 1);
    return a;
}

inline Mat amplitudes_inverse(const Mat& a) {
    require(a.rows() == kXiDim, "amplitudes_inverse: expected 400 rows");
    Mat xi = a;
    for (int i = 0; i < kModes; ++i)
        for (int j = 0; j < kModes; ++j) xi.row(i * kModes + j) /= KLCoefficient::weight(i + 1, j + 1);
    return xi;
}

// Draw `attempt` of stream (seed, index); attempt > 0 only after rejection.
inline KLCoefficient sample_xi(std::uint64_t seed, std::uint64_t index, int attempt = 0) {
    CounterRng rng(seed, index);
    for (int k = 0; k < attempt * kXiDim; ++k) rng.normal();
    KLCoefficient c;
    for (int i = 0; i < kModes; ++i)
        for (int j = 0; j < kModes; ++j) c.xi(i, j) = rng.normal();
    return c;
}

struct SolveSpec {
    int m = 50;  // 1/h
    double tol = 1e-10;
    long max_iter = 0;  // 0: 10 x unknowns
    double u_min = 1e-3;

    double h() const { return 1.0 / m; }
    int nodes() const { return (m + 1) * (m + 1); }
};

struct Solution {
    int m = 0;
    Vec y;  // (m+1)^2 nodes, flat index i1 (m+1) + i2 with x = (i1 h, i2 h)
    long iterations = 0;
    double residual = 0.0;  // relative, recomputed
    double energy = 0.0;    // y^T A y over interior unknowns

    double at(int i1, int i2) const { return y(i1 * (m + 1) + i2); }
};

// Nodal coefficient values on the (m+1)^2 grid.
inline Mat nodal_coefficient(const KLCoefficient& c, int m) {
    constexpr double pi = std::numbers::pi;
    Mat C(m + 1, kModes);
    for (int k = 0; k <= m; ++k)
        for (int i = 1; i <= kModes; ++i) C(k, i - 1) = std::cos(i * pi * k / static_cast<double>(m));
    Mat A(kModes, kModes);
    for (int i = 0; i < kModes; ++i)
        for (int j = 0; j < kModes; ++j) A(i, j) = c.xi(i, j) * KLCoefficient::weight(i + 1, j + 1);
    Mat U = C * A * C.transpose();
    U.array() += 2.0;
    return U;
}

inline double harmonic(double a, double b) { return 2.0 * a * b / (a + b); }

// Interior system for the (m-1)^2 unknowns; face coefficients are harmonic means of the nodal values.
inline Eigen::SparseMatrix<double> assemble(const Mat& U) {
    const int m = static_cast<int>(U.rows()) - 1;
    const int n = m - 1;
    auto id = [n](int i, int j) { return (i - 1) * n + (j - 1); };
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(static_cast<std::size_t>(5 * n * n));
    for (int i = 1; i < m; ++i) {
        for (int j = 1; j < m; ++j) {
            double diag = 0.0;
            const int nb[4][2] = {{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}};
            for (const auto& q : nb) {
                double a = harmonic(U(i, j), U(q[0], q[1]));
                diag += a;
                bool interior = q[0] >= 1 && q[0] < m && q[1] >= 1 && q[1] < m;
                if (interior) t.emplace_back(id(i, j), id(q[0], q[1]), -a);
            }
            t.emplace_back(id(i, j), id(i, j), diag);
        }
    }
    Eigen::SparseMatrix<double> A(n * n, n * n);
    A.setFromTriplets(t.begin(), t.end());
    return A;
}

inline Solution solve_nodal(const Mat& U, const SolveSpec& spec) {
    const int m = spec.m;
    require(m >= 2, "pde solve: need at least two cells per axis");
    require(U.rows() == m + 1 && U.cols() == m + 1, "pde solve: coefficient grid has wrong shape");
    require(spec.tol > 0.0, "pde solve: tolerance must be positive");
    if (U.minCoeff() < spec.u_min)
        throw Error("pde solve: coefficient " + std::to_string(U.minCoeff()) + " below u_min");

    const int n = m - 1;
    Eigen::SparseMatrix<double> A = assemble(U);
    Vec b = Vec::Constant(n * n, spec.h() * spec.h());

    Eigen::ConjugateGradient<Eigen::SparseMatrix<double>, Eigen::Lower | Eigen::Upper,
                             Eigen::DiagonalPreconditioner<double>>
        cg;
    cg.setTolerance(spec.tol);
    cg.setMaxIterations(spec.max_iter > 0 ? spec.max_iter : 10L * n * n);
    cg.compute(A);
    Vec x = cg.solve(b);
    long iters = cg.iterations();
    double res = (b - A * x).norm() / b.norm();
    // The recurrence residual can drift from the true one; restart from the iterate.
    for (int k = 0; k < 3 && res > spec.tol; ++k) {
        x = cg.solveWithGuess(b, x);
        iters += cg.iterations();
        res = (b - A * x).norm() / b.norm();
    }
    if (!(res <= spec.tol))
        throw Error("pde solve: CG did not converge (relative residual " + std::to_string(res) + ")");

    Solution s;
    s.m = m;
    s.y = Vec::Zero(spec.nodes());
    for (int i = 1; i < m; ++i)
        for (int j = 1; j < m; ++j) s.y(i * (m + 1) + j) = x((i - 1) * n + (j - 1));
    s.iterations = iters;
    s.residual = res;
    s.energy = x.dot(A * x);
    return s;
}

inline Solution solve(const KLCoefficient& c, const SolveSpec& spec) {
    return solve_nodal(nodal_coefficient(c, spec.m), spec);
}

inline Solution solve_constant(double u, const SolveSpec& spec) {
    return solve_nodal(Mat::Constant(spec.m + 1, spec.m + 1, u), spec);
}

// Double sine series of -Lap y = 1 on the unit square; `terms` odd modes per axis.
inline double series_oracle(double x1, double x2, int terms = 200) {
    require(terms >= 50, "series_oracle: need at least 50 terms");
    constexpr double pi = std::numbers::pi;
    std::vector<double> s1(static_cast<std::size_t>(terms)), s2(static_cast<std::size_t>(terms));
    for (int k = 0; k < terms; ++k) {
        s1[k] = std::sin((2 * k + 1) * pi * x1);
        s2[k] = std::sin((2 * k + 1) * pi * x2);
    }
    double s = 0.0;
    for (int a = 0; a < terms; ++a) {
        const double p = 2 * a + 1;
        for (int b = 0; b < terms; ++b) {
            const double q = 2 * b + 1;
            s += s1[a] * s2[b] / (p * q * (p * p + q * q));
        }
    }
    return 16.0 / (pi * pi * pi * pi) * s;
}

struct PairDataset {
    int m = 50;
    std::uint64_t seed = 0;
    Mat xi;  // 400 x M
    Mat y;   // (m+1)^2 x M
    std::vector<int> rejections;
    double u_min = 1e-3;

    long count() const { return xi.cols(); }
    long total_rejections() const {
        long s = 0;
        for (int r : rejections) s += r;
        return s;
    }

    // manifest + <stem>.bin; per record 400 inputs then the outputs
    void save(const std::filesystem::path& manifest) const {
        auto blob = io::blob_path(manifest);
        std::vector<double> data;
        data.reserve(static_cast<std::size_t>((xi.rows() + y.rows()) * count()));
        for (long k = 0; k < count(); ++k) {
            data.insert(data.end(), xi.col(k).data(), xi.col(k).data() + xi.rows());
            data.insert(data.end(), y.col(k).data(), y.col(k).data() + y.rows());
        }
        io::write_f64_file(blob, data);
        nlohmann::json j{{"M", count()},
                         {"d_in", kXiDim},
                         {"d_out", (m + 1) * (m + 1)},
                         {"seed", seed},
                         {"h", 1.0 / m},
                         {"dtype", "f64le"},
                         {"data_file", blob.filename().string()},
                         {"u_min", u_min},
                         {"rejections", total_rejections()}};
        io::write_json(manifest, j);
    }

    static PairDataset load(const std::filesystem::path& manifest) {
        auto j = io::read_json(manifest);
        require(j.value("dtype", "f64le") == "f64le", "dataset: unsupported dtype");
        PairDataset ds;
        const long M = j.at("M");
        const int d_in = j.at("d_in");
        const int d_out = j.at("d_out");
        require(d_in == kXiDim, "dataset: d_in must be 400");
        ds.m = static_cast<int>(std::lround(1.0 / j.at("h").get<double>()));
        require((ds.m + 1) * (ds.m + 1) == d_out, "dataset: d_out does not match h");
        ds.seed = j.at("seed");
        ds.u_min = j.value("u_min", 1e-3);
        auto data = io::read_f64_file(manifest.parent_path() / j.at("data_file").get<std::string>());
        require(static_cast<long>(data.size()) == M * (d_in + d_out), "dataset: binary file has wrong size");
        ds.xi.resize(d_in, M);
        ds.y.resize(d_out, M);
        const double* p = data.data();
        for (long k = 0; k < M; ++k) {
            ds.xi.col(k) = Eigen::Map<const Vec>(p, d_in);
            p += d_in;
            ds.y.col(k) = Eigen::Map<const Vec>(p, d_out);
            p += d_out;
        }
        ds.rejections.assign(static_cast<std::size_t>(M), 0);
        return ds;
    }
};

inline PairDataset generate(long M, std::uint64_t seed, const SolveSpec& spec, int threads = 1) {
    require(M >= 1, "generate: need M >= 1");
    PairDataset ds;
    ds.m = spec.m;
    ds.seed = seed;
    ds.u_min = spec.u_min;
    ds.xi.resize(kXiDim, M);
    ds.y.resize(spec.nodes(), M);
    ds.rejections.assign(static_cast<std::size_t>(M), 0);
    parallel_for(static_cast<std::size_t>(M), threads, [&](std::size_t k) {
        for (int attempt = 0;; ++attempt) {
            require(attempt < 1000, "generate: coefficient rejected 1000 times");
            KLCoefficient c = sample_xi(seed, k, attempt);
            Mat U = nodal_coefficient(c, spec.m);
            if (U.minCoeff() < spec.u_min) {
                ds.rejections[k] = attempt + 1;
                continue;
            }
            ds.xi.col(static_cast<Eigen::Index>(k)) = c.flat();
            ds.y.col(static_cast<Eigen::Index>(k)) = solve_nodal(U, spec).y;
            return;
        }
    });
    return ds;
}

}  // namespace binn::pde
