#include "cli.hpp"

#include "binn/constructor.hpp"
#include "binn/io.hpp"
#include "binn/svg.hpp"

#include <cstdio>
#include <memory>

namespace binn::cli {

namespace {

struct RateOpts {
    std::string fn = "rate";
    int dims = 2;
    std::vector<int> n_list{4, 8, 16, 32};
    double c_eps = 1.0;
    long samples = 20000;
    std::string out = "rate.csv";
    std::string plot;
};

void run_rate(const RateOpts& o, const Globals& g) {
    TrueMap F;
    if (o.fn == "rate") {
        if (o.dims != 2) throw UsageError("--fn rate is two-dimensional; use --dims 2");
        F = rate_map();
    } else if (o.fn == "identity") {
        F = identity_map(o.dims);
    } else if (o.fn == "random") {
        F = random_bilipschitz_map(o.dims, g.seed);
    } else {
        throw UsageError("--fn must be rate, identity or random");
    }
    if (o.n_list.size() < 3) throw UsageError("--n needs at least three grid sizes");
    RateStudy st = rate_study(F, o.n_list, o.c_eps, o.samples, g.seed, g.threads);
    io::write_text(o.out, st.csv());
    std::printf("Lip %.6g, Lip^-1 %.6g (sampled)\n", st.lipschitz.lip, st.lipschitz.lip_inv);
    std::printf("%6s %14s %14s %14s %14s %16s\n", "n", "err_fwd", "err_inv", "bound_fwd", "bound_inv", "r");
    for (const auto& r : st.rows)
        std::printf("%6d %14.6e %14.6e %14.6e %14.6e %16.12f\n", r.n, r.err_fwd, r.err_inv, r.bound_fwd, r.bound_inv,
                    r.r);
    std::printf("slope %.4f (forward), %.4f (inverse path)\n", st.slope, st.slope_inv);
    if (!o.plot.empty()) {
        svg::Series a{"err_fwd", {}, {}}, b{"bound_fwd", {}, {}}, c{"err_inv", {}, {}};
        for (const auto& r : st.rows) {
            a.x.push_back(r.n);
            a.y.push_back(r.err_fwd);
            b.x.push_back(r.n);
            b.y.push_back(r.bound_fwd);
            c.x.push_back(r.n);
            c.y.push_back(r.err_inv);
        }
        io::write_text(o.plot, svg::line_chart("L2 error vs n", {a, b, c}, true, true));
    }
}

}  // namespace

void add_rate_study(CLI::App& app, Globals& g) {
    auto o = std::make_shared<RateOpts>();
    auto* sub = app.add_subcommand("rate-study", "Empirical L2 error of the composed construction against n");
    sub->add_option("--fn", o->fn, "Synthetic map: rate, identity or random")->capture_default_str();
    sub->add_option("--dims", o->dims, "Dimension d")->capture_default_str()->check(CLI::Range(2, 6));
    sub->add_option("--n", o->n_list, "Grid sizes per axis")->capture_default_str()->delimiter(',');
    sub->add_option("--c-eps", o->c_eps, "eps = c_eps / n")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--samples", o->samples, "Monte-Carlo samples")->capture_default_str()->check(CLI::Range(100L, 100000000L));
    sub->add_option("--out", o->out, "CSV output")->capture_default_str();
    sub->add_option("--plot", o->plot, "Write an SVG chart to this path");
    sub->callback([o, &g] { run_rate(*o, g); });
}

}  // namespace binn::cli
