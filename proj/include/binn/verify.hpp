#pragma once

#include "binn/lifted.hpp"
#include "binn/ode.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace binn {

using MapFn = std::function<Vec(const Vec&)>;

inline Vec sample_box(CounterRng& rng, int d, double lo, double hi) {
    Vec x(d);
    for (int k = 0; k < d; ++k) x(k) = rng.uniform(lo, hi);
    return x;
}

// max ||inv(fwd(x)) - x|| over the given probes.
inline double round_trip_residual(const MapFn& fwd, const MapFn& inv, const std::vector<Vec>& probes) {
    double worst = 0.0;
    for (const auto& x : probes) worst = std::max(worst, (inv(fwd(x)) - x).norm());
    return worst;
}

inline std::vector<Vec> random_probes(int d, long count, std::uint64_t seed, double lo = 0.0, double hi = 1.0) {
    std::vector<Vec> out;
    out.reserve(static_cast<std::size_t>(count));
    for (long i = 0; i < count; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        out.push_back(sample_box(rng, d, lo, hi));
    }
    return out;
}

// Grid nodes, the same nodes jittered by up to `jitter`, and uniform points of [0,1]^d.
inline std::vector<Vec> certificate_probes(const GridDataset& g, long uniform, std::uint64_t seed,
                                           double jitter) {
    std::vector<Vec> out;
    for (long i = 0; i < g.count(); ++i) {
        out.push_back(g.X.col(i));
        CounterRng rng(seed ^ 0x4A17ULL, static_cast<std::uint64_t>(i));
        out.push_back(g.X.col(i) + sample_box(rng, g.d, -jitter, jitter));
    }
    auto u = random_probes(g.d, uniform, seed);
    out.insert(out.end(), u.begin(), u.end());
    return out;
}

// Largest ||f(a) - f(b)|| / ||a - b|| over `pairs` pairs: a from `base`, b = a + r u with |r| <= radius.
inline double max_local_ratio(const MapFn& f, const std::vector<Vec>& base, long pairs, std::uint64_t seed,
                              double radius) {
    require(!base.empty(), "max_local_ratio: no base points");
    double worst = 0.0;
    for (long k = 0; k < pairs; ++k) {
        CounterRng rng(seed, static_cast<std::uint64_t>(k));
        const Vec& a = base[rng.next_u64() % base.size()];
        Vec u(a.size());
        for (Eigen::Index i = 0; i < u.size(); ++i) u(i) = rng.normal();
        Vec b = a + (radius * rng.uniform() / u.norm()) * u;
        double dx = (a - b).norm();
        if (dx == 0.0) continue;
        worst = std::max(worst, (f(a) - f(b)).norm() / dx);
    }
    return worst;
}

struct LayerNormStat {
    std::string kind;
    long layers = 0;
    long samples = 0;
    double max_norm = 0.0;      // sampled spectral norm
    double max_inv_norm = 0.0;  // same for the inverse Jacobian
    double worst_excess = 0.0;  // max over samples of norm / bound
    double norm_at_worst = 0.0;
    double bound_at_worst = 0.0;
    double sharp_at_worst = 0.0;  // kill-last only
    bool ok = true;
};

// Sampled Jacobian norms of every layer at the states reached from `probes`,
// aggregated per layer kind. Tolerance is relative.
inline std::vector<LayerNormStat> per_layer_norms(const InvertibleMap& map, const std::vector<Vec>& probes,
                                                  double rel_tol = 1e-9) {
    std::map<std::string, LayerNormStat> acc;
    std::vector<std::string> order;
    std::vector<Vec> states = probes;
    for (std::size_t li = 0; li < map.size(); ++li) {
        const FlowLayer& l = map[li];
        const std::string kind = layer_name(l);
        if (!acc.count(kind)) {
            order.push_back(kind);
            acc[kind].kind = kind;
        }
        LayerNormStat& s = acc[kind];
        ++s.layers;
        const double bound = layer_bound(l);
        const double ibound = layer_inverse_bound(l);
        const bool square = layer_in_dim(l) == layer_out_dim(l);
        for (auto& z : states) {
            Vec y = layer_forward(l, z);
            double nf = spectral_norm(layer_jacobian(l, z));
            double ni = square ? spectral_norm(layer_inverse_jacobian(l, y)) : 0.0;
            ++s.samples;
            s.max_norm = std::max(s.max_norm, nf);
            s.max_inv_norm = std::max(s.max_inv_norm, ni);
            double e = std::max(nf / bound, square ? ni / ibound : 0.0);
            if (e > s.worst_excess) {
                s.worst_excess = e;
                s.norm_at_worst = nf / bound >= ni / ibound ? nf : ni;
                s.bound_at_worst = nf / bound >= ni / ibound ? bound : ibound;
                if (const auto* k = std::get_if<KillLast>(&l)) s.sharp_at_worst = k->sharp_bound();
            }
            if (nf > bound * (1.0 + rel_tol) || (square && ni > ibound * (1.0 + rel_tol))) s.ok = false;
            z = std::move(y);
        }
    }
    std::vector<LayerNormStat> out;
    for (const auto& k : order) out.push_back(acc[k]);
    return out;
}

struct FlowCheck {
    long layers = 0;
    long points = 0;
    double max_error = 0.0;
};

// Closed form against RK4 of the defining field at the supplied states; layers
// without a field are skipped.
inline FlowCheck flow_oracle_check(const InvertibleMap& map, const std::vector<Vec>& probes, int steps = 64) {
    FlowCheck fc;
    std::vector<Vec> states = probes;
    for (std::size_t li = 0; li < map.size(); ++li) {
        const FlowLayer& l = map[li];
        const bool has = layer_has_field(l);
        if (has) ++fc.layers;
        for (auto& z : states) {
            Vec y = layer_forward(l, z);
            if (has) {
                Vec r = rk4_flow([&](const Vec& v) { return layer_field(l, v); }, z, 1.0, steps);
                fc.max_error = std::max(fc.max_error, (r - y).norm());
                Vec b = rk4_flow([&](const Vec& v) -> Vec { return -layer_field(l, v); }, y, 1.0, steps);
                fc.max_error = std::max(fc.max_error, (b - z).norm());
                ++fc.points;
            }
            z = std::move(y);
        }
    }
    return fc;
}

}  // namespace binn
