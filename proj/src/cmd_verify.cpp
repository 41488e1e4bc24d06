#include "util.hpp"

#include "binn/verify.hpp"

#include <cstdio>
#include <memory>

namespace binn::cli {

namespace {

struct VerifyOpts {
    std::string model, grid, data, pca;
    long n_test = 1000;
    long probes = 1000;
    long pairs = 10000;
};

struct Report {
    bool all = true;
    void line(bool ok, const std::string& what) {
        all = all && ok;
        std::printf("[%s] %s\n", ok ? "PASS" : "FAIL", what.c_str());
    }
};

template <class... A>
std::string fmt(const char* f, A... a) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

void verify_layers(Report& rep, const InvertibleMap& layers, const std::vector<Vec>& states) {
    for (const auto& s : per_layer_norms(layers, states)) {
        std::string what = s.kind + " per-layer norm: worst " + fmt("%.4g against bound %.4g", s.norm_at_worst,
                                                                     s.bound_at_worst);
        if (s.sharp_at_worst > 0.0) what += fmt(" (gate-slope bound %.4g, %ld samples)", s.sharp_at_worst, s.samples);
        rep.line(s.ok, what);
    }
    FlowCheck fc = flow_oracle_check(layers, states);
    rep.line(fc.max_error <= 1e-8, fmt("RK4 flow oracle on %ld layers: max error %.3e", fc.layers, fc.max_error));
}

int verify_main(const VerifyOpts& o, const Globals& g, const nlohmann::json& j) {
    Report rep;
    const std::string kind = j.value("kind", "");
    std::optional<GridDataset> grid;
    if (!o.grid.empty()) grid = load_grid(o.grid);

    if (kind == "main") {
        ConstructedMap m = ConstructedMap::from_json(j);
        auto probes = random_probes(m.d, o.probes, g.seed);
        double rt = round_trip_residual([&](const Vec& x) { return m.forward(x); },
                                        [&](const Vec& y) { return m.exact_inverse(y); }, probes);
        rep.line(rt <= 1e-9, fmt("round trip on %ld probes: %.3e", o.probes, rt));
        std::vector<Vec> base = probes;
        if (grid) {
            if (grid->d != m.d || grid->n != m.n) throw UsageError("grid does not match the model");
            double res = max_interpolation_residual(m, *grid);
            rep.line(res < m.epsilon, fmt("interpolation residual %.3e < eps %.3g", res, m.epsilon));
            base = certificate_probes(*grid, o.probes, g.seed, 0.5 / m.n);
        }
        auto f = [&](const Vec& x) { return m.forward_tilde(x); };
        auto fi = [&](const Vec& y) { return m.inverse_tilde(y); };
        double rf = max_local_ratio(f, base, o.pairs, g.seed, 0.1 / m.n);
        std::vector<Vec> ybase;
        for (const auto& x : base) ybase.push_back(f(x));
        double ri = max_local_ratio(fi, ybase, o.pairs, g.seed + 1, 0.1 / m.n);
        rep.line(rf <= m.certificate.product_forward,
                 fmt("forward Lipschitz ratio %.4g <= certificate %.4g", rf, m.certificate.product_forward));
        rep.line(ri <= m.certificate.product_inverse,
                 fmt("inverse Lipschitz ratio %.4g <= certificate %.4g", ri, m.certificate.product_inverse));
        verify_layers(rep, m.stages, base);
    } else if (kind == "lifted") {
        LiftedMap m = LiftedMap::from_json(j);
        auto probes = random_probes(m.d, o.probes, g.seed);
        InvertibleMap inner = m.inner();
        Lift lift{m.d};
        double rt = 0.0;
        for (const auto& x : probes) {
            Vec z = lift.forward(x);
            rt = std::max(rt, (lift.inverse(inner.inverse(inner.forward(z))) - x).norm());
        }
        rep.line(rt <= 1e-9, fmt("lifted-state round trip on %ld probes: %.3e", o.probes, rt));
        std::vector<Vec> base = probes;
        if (grid) {
            if (grid->d != m.d || grid->n != m.n) throw UsageError("grid does not match the model");
            double res = max_interpolation_residual(m, *grid);
            rep.line(res <= 1e-10, fmt("interpolation residual %.3e <= %.0e", res, 1e-10));
            base = certificate_probes(*grid, o.probes, g.seed, 0.5 / m.n);
        }
        auto f = [&](const Vec& x) { return m.forward_discard(x); };
        double rf = max_local_ratio(f, base, o.pairs, g.seed, 0.1 / m.n);
        rep.line(rf <= m.certificate.product_forward,
                 fmt("forward Lipschitz ratio %.4g <= certificate %.4g", rf, m.certificate.product_forward));
        std::vector<Vec> lifted;
        for (const auto& x : base) lifted.push_back(lift.forward(x));
        verify_layers(rep, inner, lifted);
    } else if (j.contains("architecture")) {
        Checkpoint c = load_checkpoint(o.model);
        const int d = c.model.dim();
        rep.line(c.model.params().allFinite(), "all parameters finite");
        if (!o.data.empty() != !o.pca.empty()) throw UsageError("--data and --pca go together");
        std::vector<Vec> xs, ys;
        double tol = 1e-6;
        if (!o.data.empty()) {
            // Reduced test pairs: forward probes from the input side, inverse probes from the output side.
            pde::PairDataset ds = load_dataset(o.data);
            PcaBundle b = load_pca(o.pca);
            if (b.bx.truncation != d) throw UsageError("checkpoint dimension does not match the PCA bases");
            const long nt = std::min(o.n_test, ds.count() - 1);
            Pipeline p = apply_pipeline(std::move(b.bx), std::move(b.by), ds, 1, nt, b.repr);
            const long k = std::min<long>(o.probes, p.data.u_test.cols());
            for (long i = 0; i < k; ++i) {
                xs.push_back(p.data.u_test.col(i));
                ys.push_back(p.data.y_test.col(i));
            }
            tol = 1e-9;
        } else {
            for (long i = 0; i < o.probes; ++i) {
                CounterRng rng(g.seed, static_cast<std::uint64_t>(i));
                Vec u(d);
                for (int k = 0; k < d; ++k) u(k) = rng.normal();
                xs.push_back(u);
            }
            ys = xs;
        }
        double rt = 0.0;
        for (const auto& u : xs) rt = std::max(rt, (c.model.inverse(c.model.forward(u)) - u).norm());
        for (const auto& v : ys) rt = std::max(rt, (c.model.forward(c.model.inverse(v)) - v).norm());
        rep.line(rt <= tol, fmt("round trip on %zu probes: %.3e (tolerance %.0e)", xs.size() + ys.size(), rt, tol));
    } else {
        throw UsageError("unrecognised model file " + o.model);
    }
    std::printf("%s\n", rep.all ? "all checks passed" : "some checks failed");
    return rep.all ? 0 : 1;
}

}  // namespace

void add_verify(CLI::App& app, Globals& g) {
    auto o = std::make_shared<VerifyOpts>();
    auto* sub = app.add_subcommand("verify", "Run the invariant suite against a serialized model");
    sub->add_option("--model", o->model, "Construction JSON or checkpoint manifest")->required()->check(
        CLI::ExistingFile);
    sub->add_option("--grid", o->grid, "Grid file for interpolation and certificate probes")->check(
        CLI::ExistingFile);
    sub->add_option("--probes", o->probes, "Round-trip probes")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--pairs", o->pairs, "Sampled pairs for Lipschitz ratios")->capture_default_str()->check(
        CLI::PositiveNumber);
    sub->add_option("--data", o->data, "Dataset for data-distributed probes of a checkpoint")->check(
        CLI::ExistingFile);
    sub->add_option("--pca", o->pca, "PCA directory matching --data");
    sub->add_option("--n-test", o->n_test, "Records taken from the end of the dataset")->capture_default_str();
    sub->callback([o, &g] {
        nlohmann::json j;
        try {
            j = io::read_json(o->model);
        } catch (const Error& e) {
            throw UsageError(e.what());
        }
        int code = verify_main(*o, g, j);
        if (code != 0) throw CLI::RuntimeError(code);
    });
}

}  // namespace binn::cli
