#pragma once

#include "binn/io.hpp"
#include "binn/linalg.hpp"

#include <numeric>
#include <vector>

namespace binn {

// Non-centered PCA on the columns of a sample matrix.
class PCABasis {
public:
    int ambient_dim = 0;
    long sample_count = 0;
    int truncation = 0;
    Vec eigvals;     // all computed eigenvalues, descending, clipped at 0
    Mat eigvecs;     // ambient_dim x truncation
    double c_nu = 0.0;  // plug-in estimate
    double mean_sq_norm = 0.0;

    static PCABasis fit(const Mat& U, int d_u) {
        const long N = U.cols();
        const int D = static_cast<int>(U.rows());
        require(N >= 1, "pca fit: need at least one sample");
        require(d_u >= 1 && d_u <= std::min<long>(N, D), "pca fit: truncation out of range");

        PCABasis b;
        b.ambient_dim = D;
        b.sample_count = N;
        b.truncation = d_u;

        EigenPairs ep;
        const bool gram = D > N;
        if (gram)
            ep = jacobi_eigen(U.transpose() * U / static_cast<double>(N));
        else
            ep = jacobi_eigen(U * U.transpose() / static_cast<double>(N));

        b.eigvals = ep.values;
        for (Eigen::Index i = 0; i < b.eigvals.size(); ++i) {
            if (b.eigvals(i) < -1e-12 * std::max(1.0, ep.values(0)))
                throw Error("pca fit: covariance has a negative eigenvalue " + std::to_string(b.eigvals(i)));
            b.eigvals(i) = std::max(b.eigvals(i), 0.0);
        }

        if (gram) {
            b.eigvecs.resize(D, d_u);
            for (int k = 0; k < d_u; ++k) {
                require(b.eigvals(k) > 0.0, "pca fit: truncation exceeds the rank of the samples");
                Vec v = U * ep.vectors.col(k);
                b.eigvecs.col(k) = v / v.norm();
            }
        } else {
            b.eigvecs = ep.vectors.leftCols(d_u);
        }
        fix_signs(b.eigvecs);

        double m4 = 0.0, m2 = 0.0;
        for (long i = 0; i < N; ++i) {
            double s = U.col(i).squaredNorm();
            m2 += s;
            m4 += s * s;
        }
        b.mean_sq_norm = m2 / N;
        // E||u||^4 - ||C||_F^2, using tr(C^2) = mean u^T C u.
        double c2 = m4 / N - b.eigvals.squaredNorm();
        b.c_nu = std::sqrt(std::max(c2, 0.0));
        return b;
    }

    Vec encode(const Vec& u) const {
        if (u.size() != ambient_dim) throw DimensionError("pca encode: dimension mismatch");
        return eigvecs.transpose() * u;
    }
    Mat encode(const Mat& U) const {
        if (U.rows() != ambient_dim) throw DimensionError("pca encode: dimension mismatch");
        return eigvecs.transpose() * U;
    }
    Vec decode(const Vec& v) const {
        if (v.size() != truncation) throw DimensionError("pca decode: length mismatch");
        return eigvecs * v;
    }
    Mat decode(const Mat& V) const {
        if (V.rows() != truncation) throw DimensionError("pca decode: length mismatch");
        return eigvecs * V;
    }

    double tail_sum(int d) const {
        require(d >= 0, "pca tail_sum: negative index");
        double s = 0.0;
        for (Eigen::Index j = d; j < eigvals.size(); ++j) s += eigvals(j);
        return s;
    }
    double tail_sum() const { return tail_sum(truncation); }

    double energy_fraction(int d) const {
        double total = eigvals.sum();
        require(total > 0.0, "pca: zero spectrum");
        return eigvals.head(std::min<Eigen::Index>(d, eigvals.size())).sum() / total;
    }

    Vec weight_vector() const {
        Vec w = eigvals.head(truncation);
        double s = w.sum();
        require(s > 0.0, "pca weight_vector: zero spectrum");
        return w / s;
    }

    // manifest + <stem>.bin holding the eigvecs, one per row
    void save(const std::filesystem::path& manifest) const {
        auto blob = io::blob_path(manifest);
        io::write_f64_file(blob, io::row_major(eigvecs.transpose()));
        nlohmann::json j{{"ambient_dim", ambient_dim},
                         {"sample_count", sample_count},
                         {"truncation", truncation},
                         {"eigvals", std::vector<double>(eigvals.data(), eigvals.data() + eigvals.size())},
                         {"c_nu", c_nu},
                         {"c_nu_kind", "empirical plug-in estimate"},
                         {"mean_sq_norm", mean_sq_norm},
                         {"eigvec_file", blob.filename().string()},
                         {"eigvec_rows", truncation},
                         {"eigvec_cols", ambient_dim},
                         {"dtype", "f64le"}};
        io::write_json(manifest, j);
    }

    static PCABasis load(const std::filesystem::path& manifest) {
        auto j = io::read_json(manifest);
        PCABasis b;
        b.ambient_dim = j.at("ambient_dim");
        b.sample_count = j.at("sample_count");
        b.truncation = j.at("truncation");
        auto ev = j.at("eigvals").get<std::vector<double>>();
        b.eigvals = Eigen::Map<const Vec>(ev.data(), static_cast<Eigen::Index>(ev.size()));
        b.c_nu = j.at("c_nu");
        b.mean_sq_norm = j.value("mean_sq_norm", 0.0);
        require(j.value("dtype", "f64le") == "f64le", "pca basis: unsupported dtype");
        auto blob = manifest.parent_path() / j.at("eigvec_file").get<std::string>();
        b.eigvecs = io::from_row_major(io::read_f64_file(blob), b.truncation, b.ambient_dim).transpose();
        return b;
    }
};

// Mean over columns of ||u - decode(encode(u))||^2.
inline double mean_reconstruction_error(const PCABasis& b, const Mat& U) {
    Mat R = U - b.decode(b.encode(U));
    return R.colwise().squaredNorm().sum() / static_cast<double>(U.cols());
}

struct TailBoundReport {
    int d = 0;
    long N = 0;
    double tail_x = 0.0, tail_y = 0.0;
    double c_mu = 0.0, c_fmu = 0.0;
    double pca_forward = 0.0, pca_inverse = 0.0;
    double c_nn = 0.0, c_nn_inv = 0.0;
    double full_forward = 0.0, full_inverse = 0.0;

    nlohmann::json to_json() const {
        return {{"d", d},
                {"N", N},
                {"tail_x", tail_x},
                {"tail_y", tail_y},
                {"c_mu", c_mu},
                {"c_fmu", c_fmu},
                {"pca_forward", pca_forward},
                {"pca_inverse", pca_inverse},
                {"c_nn", c_nn},
                {"c_nn_inv", c_nn_inv},
                {"full_forward", full_forward},
                {"full_inverse", full_inverse}};
    }
};

inline double c_nn_forward(double lip, int d, double c_eps) {
    return 2.0 * ((3.0 + lip * lip) * d + 3.0 * c_eps * c_eps);
}

inline double c_nn_inverse(double lip, double lip_inv, int d, double c_eps) {
    return 2.0 * std::pow(lip, d) * ((2.0 * (2.0 + lip) * (2.0 + lip) + 1.0) * d + 2.0 * lip_inv * c_eps + 6.0);
}

// lip/lip_inv: of the operator F^dagger; lip_red/lip_red_inv: of the reduced map F;
// n_grid: nodes per axis of the construction (the construction term uses n^-2).
inline TailBoundReport tail_bound_report(const PCABasis& bx, const PCABasis& by, double lip, double lip_inv,
                                         long N, double lip_red = 1.0, double lip_red_inv = 1.0, int n_grid = 2,
                                         double c_eps = 1.0) {
    require(bx.truncation == by.truncation, "tail_bound_report: d_X and d_Y must agree");
    TailBoundReport r;
    r.d = bx.truncation;
    r.N = N;
    r.tail_x = bx.tail_sum();
    r.tail_y = by.tail_sum();
    r.c_mu = bx.c_nu;
    r.c_fmu = by.c_nu;
    const double s = std::sqrt(static_cast<double>(r.d)) / std::sqrt(static_cast<double>(N));
    r.pca_forward = 2.0 * (lip * lip * r.c_mu + r.c_fmu) * s + 2.0 * (lip * lip * r.tail_x + r.tail_y);
    r.pca_inverse = 2.0 * (lip_inv * lip_inv * r.c_fmu + r.c_mu) * s + 2.0 * (lip_inv * lip_inv * r.tail_y + r.tail_x);
    r.c_nn = c_nn_forward(lip_red, r.d, c_eps);
    r.c_nn_inv = c_nn_inverse(lip_red, lip_red_inv, r.d, c_eps);
    const double n2 = 1.0 / (static_cast<double>(n_grid) * n_grid);
    r.full_forward = 2.0 * r.c_nn * n2 + 2.0 * r.pca_forward;
    r.full_inverse = 2.0 * r.c_nn_inv * n2 + 2.0 * r.pca_inverse;
    return r;
}

}  // namespace binn
