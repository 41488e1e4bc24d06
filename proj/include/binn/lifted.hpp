#pragma once

#include "binn/constructor.hpp"

namespace binn {

// Lifted construction in R^{2d+2}: Lift, eta, translations, copy, kill-last, Project.
class LiftedMap {
public:
    InvertibleMap layers;  // full chain including Lift and Project
    LipschitzCertificate certificate;
    int n = 2, d = 2;
    long grid_count = 0;
    double lip_inv_estimate = 0.0;
    double kill_delta = 0.0;

    // Strict: Project rejects states off its domain.
    Vec forward(const Vec& x) const { return layers.forward(x); }
    Vec inverse(const Vec& y) const { return layers.inverse(y); }

    // Off-grid evaluation: run every layer but Project, keep the first d coordinates.
    Vec forward_discard(const Vec& x) const { return lifted_state(x).head(d); }

    Vec lifted_state(const Vec& x) const {
        Vec z = x;
        for (std::size_t i = 0; i + 1 < layers.size(); ++i) z = layer_forward(layers[i], z);
        return z;
    }

    // Layers strictly between Lift and Project.
    InvertibleMap inner() const {
        InvertibleMap m;
        for (std::size_t i = 1; i + 1 < layers.size(); ++i) m.push_back(layers[i]);
        return m;
    }

    std::vector<const KillLast*> kill_layers() const {
        std::vector<const KillLast*> out;
        for (const auto& l : layers.layers())
            if (const auto* k = std::get_if<KillLast>(&l)) out.push_back(k);
        return out;
    }

    json to_json() const {
        return {{"kind", "lifted"},
                {"n", n},
                {"d", d},
                {"grid_count", grid_count},
                {"lip_inv_estimate", lip_inv_estimate},
                {"kill_delta", kill_delta},
                {"layers", layers.to_json()},
                {"certificate", certificate.to_json()},
                {"layer_counts", {{"actual", static_cast<long>(layers.size())}, {"stated_weight", 2 + 14 * grid_count},
                                  {"stated_added", 2 + 4 * grid_count}}}};
    }

    static LiftedMap from_json(const json& j) {
        require(j.at("kind") == "lifted", "lifted map: not a lifted-construction file");
        LiftedMap m;
        m.n = j.at("n");
        m.d = j.at("d");
        m.grid_count = j.at("grid_count");
        m.lip_inv_estimate = j.at("lip_inv_estimate");
        m.kill_delta = j.at("kill_delta");
        m.layers = InvertibleMap::from_json(j.at("layers"));
        m.certificate = LipschitzCertificate::from_json(j.at("certificate"));
        return m;
    }
};

inline LiftedMap construct_f_nn_lifted(const GridDataset& data) {
    data.validate();
    const int d = data.d, n = data.n;
    const int D = 2 * d + 2;
    const long N = data.count();

    DataLipschitz lips = estimate_lipschitz(data);
    if (!std::isfinite(lips.lip_inv))
        throw Error("lifted construct: two grid points share the same y value");

    LiftedMap m;
    m.n = n;
    m.d = d;
    m.grid_count = N;
    m.lip_inv_estimate = lips.lip_inv;

    std::vector<FlowLayer> head{Lift{d}, ShiftLast{n, D, d - 1, true}};
    Mat Z(D, N);
    for (long i = 0; i < N; ++i) {
        Vec z = data.X.col(i);
        for (const auto& l : head) z = layer_forward(l, z);
        Z.col(i) = z;
    }

    // Anchors t_alpha sit in the last coordinate, pairwise 1/N apart.
    std::vector<FlowLayer> phi;
    for (long i = 0; i < N; ++i) {
        LocalizedTranslate l;
        l.dim = D;
        l.gate = D - 1;
        l.center = Z(D - 1, i);
        l.scale = static_cast<double>(N);
        l.disp = data.Y.col(i) - data.X.col(i);
        l.lifted = true;
        phi.push_back(l);
    }
    Z = detail::apply_layers(phi, Z);
    std::vector<FlowLayer> copy{CopyBlock{d}};
    Z = detail::apply_layers(copy, Z);

    const double delta = 1.0 / (std::sqrt(static_cast<double>(d)) * lips.lip_inv * n);
    const double stated = 1.0 + 6.0 / (lips.lip_inv * n);
    m.kill_delta = delta;
    std::vector<FlowLayer> kill;
    for (long i = 0; i < N; ++i) kill.push_back(KillLast{d, Z.col(i), delta, Z(D - 1, i), stated});

    double c = 0.0;
    for (long i = 0; i < N; ++i) c = std::max(c, (data.Y.col(i) - data.X.col(i)).norm());
    m.certificate.c = c;
    m.certificate.add("lift", 2.0, 1.0);
    m.certificate.add("eta", n / (n - 1.0), n / (n - 1.0));
    m.certificate.add("phi", 1.0 + 6.0 * N * c, 1.0 + 6.0 * N * c);
    m.certificate.add("copy", 2.0 * std::sqrt(static_cast<double>(d)), 2.0 * std::sqrt(static_cast<double>(d)));
    m.certificate.add("kill_last", stated, stated);
    m.certificate.add("project", 1.0, 2.0);

    for (auto& l : head) m.layers.push_back(std::move(l));
    for (auto& l : phi) m.layers.push_back(std::move(l));
    m.layers.push_back(copy.front());
    for (auto& l : kill) m.layers.push_back(std::move(l));
    m.layers.push_back(Project{d});
    return m;
}

inline double max_interpolation_residual(const LiftedMap& m, const GridDataset& data) {
    double worst = 0.0;
    for (long i = 0; i < data.count(); ++i)
        worst = std::max(worst, (m.forward(data.X.col(i)) - data.Y.col(i)).norm());
    return worst;
}

}  // namespace binn
