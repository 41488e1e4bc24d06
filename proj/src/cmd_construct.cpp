#include "util.hpp"

#include "binn/lifted.hpp"

#include <cstdio>
#include <memory>

namespace binn::cli {

namespace {

struct ConstructOpts {
    std::string grid, out;
    double eps = 0.0;
    double r = 0.0;
    bool auto_r = false;
    bool lifted = false;
};

void print_certificate(const LipschitzCertificate& c) {
    std::printf("certificate (c = %.6g)\n", c.c);
    for (const auto& s : c.stages) std::printf("  %-10s fwd %-12.6g inv %.6g\n", s.stage.c_str(), s.forward, s.inverse);
    std::printf("  product    fwd %-12.6g inv %.6g\n", c.product_forward, c.product_inverse);
}

void run_construct(const ConstructOpts& o) {
    GridDataset g = load_grid(o.grid);
    if (o.lifted) {
        LiftedMap m = construct_f_nn_lifted(g);
        std::printf("lifted construction: d=%d n=%d N=%ld\n", m.d, m.n, m.grid_count);
        std::printf("interpolation residual %.3e\n", max_interpolation_residual(m, g));
        std::printf("layers: %zu actual (stated realization: %ld weight, %ld added)\n", m.layers.size(),
                    2 + 14 * m.grid_count, 2 + 4 * m.grid_count);
        std::printf("Lip(F^-1) data estimate %.6g, kill-last delta %.6g\n", m.lip_inv_estimate, m.kill_delta);
        print_certificate(m.certificate);
        io::write_json(o.out, m.to_json());
        return;
    }
    const double eps = o.eps > 0.0 ? o.eps : 1.0 / g.n;
    if (!(eps < 1.0)) throw UsageError("--eps must lie in (0,1)");
    ConstructedMap m = construct_f_nn(g, eps);
    const double residual = max_interpolation_residual(m, g);
    if (o.auto_r || o.r > 0.0) {
        double r = o.r;
        if (o.auto_r) {
            DataLipschitz lips = estimate_lipschitz(g);
            r = choose_r(m.certificate.product_forward, m.certificate.product_inverse, lips.lip, lips.lip_inv, g.n,
                         g.d);
            std::printf("r = %.12g from data estimates Lip %.6g, Lip^-1 %.6g (estimate)\n", r, lips.lip,
                        lips.lip_inv);
        }
        if (!(r > 0.0 && r < 1.0)) throw UsageError("--r must lie in (0,1)");
        m = compose_with_Hr(std::move(m), r);
    }
    std::printf("construction: d=%d n=%d N=%ld eps=%.6g\n", m.d, m.n, g.count(), eps);
    std::printf("interpolation residual %.6e (%s eps)\n", residual, residual < eps ? "<" : ">=");
    std::printf("anchor coordinate j0=%d%s, separation %.6g\n", m.j0 + 1,
                m.shortcut ? " (shortcut, tilde-eta is the identity)" : "", m.delta_j0);
    const long N = g.count();
    std::printf("layers: eta %ld, phi %ld, tilde_eta %ld, tilde_phi %ld, total %ld%s\n", m.counts.eta, m.counts.phi,
                m.counts.tilde_eta, m.counts.tilde_phi, m.counts.total(), m.hr ? " + H^r" : "");
    std::printf("stated realization: %ld weight layers, %ld added layers\n", 1 + 16 * N, 1 + 6 * N);
    print_certificate(m.certificate);
    io::write_json(o.out, m.to_json());
}

}  // namespace

void add_construct(CLI::App& app, Globals&) {
    auto o = std::make_shared<ConstructOpts>();
    auto* sub = app.add_subcommand("construct", "Build the explicit invertible network interpolating a grid file");
    sub->add_option("--grid", o->grid, "Grid file {\"d\",\"n\",\"y\"}")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o->out, "Output model JSON")->required();
    sub->add_option("--eps", o->eps, "Interpolation tolerance (default 1/n)");
    sub->add_option("--r", o->r, "Compose with H^r for this r in (0,1)");
    sub->add_flag("--auto-r", o->auto_r, "Choose r from data Lipschitz estimates");
    sub->add_flag("--lifted", o->lifted, "Use the exact lifted construction");
    sub->callback([o] { run_construct(*o); });
}

}  // namespace binn::cli
