#pragma once

#include "binn/pca.hpp"
#include "binn/pde.hpp"
#include "binn/train.hpp"

namespace binn {

enum class InputRepr { Amplitude, Xi };

inline Mat input_matrix(const pde::PairDataset& ds, InputRepr repr) {
    return repr == InputRepr::Amplitude ? pde::amplitudes(ds.xi) : ds.xi;
}

struct Pipeline {
    PCABasis bx, by;
    PipelineData data;
    long n_train = 0, n_test = 0;
};

// Encodes T_r = first n_train records and T_e = last n_test records with fitted bases.
inline Pipeline apply_pipeline(PCABasis bx, PCABasis by, const pde::PairDataset& ds, long n_train, long n_test,
                               InputRepr repr = InputRepr::Amplitude) {
    const long M = ds.count();
    require(n_train >= 1 && n_test >= 1, "pipeline: empty split");
    require(n_train + n_test <= M, "pipeline: train and test sets would overlap");
    require(bx.truncation == by.truncation, "pipeline: d_X and d_Y must agree");
    Mat X = input_matrix(ds, repr);
    if (X.rows() != bx.ambient_dim || ds.y.rows() != by.ambient_dim)
        throw DimensionError("pipeline: bases do not match the dataset dimensions");
    Pipeline p;
    p.bx = std::move(bx);
    p.by = std::move(by);
    p.n_train = n_train;
    p.n_test = n_test;
    p.data.u_train = p.bx.encode(Mat(X.leftCols(n_train)));
    p.data.y_train = p.by.encode(Mat(ds.y.leftCols(n_train)));
    p.data.u_test = p.bx.encode(Mat(X.rightCols(n_test)));
    p.data.y_test = p.by.encode(Mat(ds.y.rightCols(n_test)));
    p.data.w_u = p.bx.weight_vector();
    p.data.w_y = p.by.weight_vector();
    return p;
}

// PCA on the first `fit_samples` records (0: all), then apply_pipeline.
inline Pipeline build_pipeline(const pde::PairDataset& ds, long n_train, long n_test, int d,
                               InputRepr repr = InputRepr::Amplitude, long fit_samples = 0) {
    require(d >= 2, "pipeline: reduced dimension must be >= 2");
    const long F = fit_samples > 0 ? std::min(fit_samples, ds.count()) : ds.count();
    Mat X = input_matrix(ds, repr);
    return apply_pipeline(PCABasis::fit(X.leftCols(F), d), PCABasis::fit(ds.y.leftCols(F), d), ds, n_train, n_test,
                          repr);
}

inline std::string repr_name(InputRepr r) { return r == InputRepr::Amplitude ? "amplitude" : "xi"; }

inline InputRepr parse_repr(const std::string& s) {
    if (s == "amplitude") return InputRepr::Amplitude;
    if (s == "xi") return InputRepr::Xi;
    throw Error("unknown input representation '" + s + "'");
}

// dir/pca.json referencing dir/basis_x.json and dir/basis_y.json
struct PcaBundle {
    PCABasis bx, by;
    InputRepr repr = InputRepr::Amplitude;
    long fit_samples = 0;

    void save(const std::filesystem::path& dir) const {
        std::filesystem::create_directories(dir);
        bx.save(dir / "basis_x.json");
        by.save(dir / "basis_y.json");
        Vec wu = bx.weight_vector(), wy = by.weight_vector();
        nlohmann::json j{{"input_repr", repr_name(repr)},
                         {"d", bx.truncation},
                         {"fit_samples", fit_samples},
                         {"basis_x", "basis_x.json"},
                         {"basis_y", "basis_y.json"},
                         {"w_u", std::vector<double>(wu.data(), wu.data() + wu.size())},
                         {"w_y", std::vector<double>(wy.data(), wy.data() + wy.size())},
                         {"energy_x", bx.energy_fraction(bx.truncation)},
                         {"energy_y", by.energy_fraction(by.truncation)},
                         {"tail_x", bx.tail_sum()},
                         {"tail_y", by.tail_sum()},
                         {"c_nu_x", bx.c_nu},
                         {"c_nu_y", by.c_nu}};
        io::write_json(dir / "pca.json", j);
    }

    static PcaBundle load(const std::filesystem::path& dir) {
        auto j = io::read_json(dir / "pca.json");
        PcaBundle b;
        b.repr = parse_repr(j.at("input_repr"));
        b.fit_samples = j.value("fit_samples", 0L);
        b.bx = PCABasis::load(dir / j.at("basis_x").get<std::string>());
        b.by = PCABasis::load(dir / j.at("basis_y").get<std::string>());
        return b;
    }
};

}  // namespace binn
