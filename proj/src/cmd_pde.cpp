#include "util.hpp"

#include <chrono>
#include <cstdio>
#include <memory>

namespace binn::cli {

namespace {

struct PdeGenOpts {
    long M = 2000;
    bool full = false;
    int mesh = 50;
    double tol = 1e-10;
    double u_min = 1e-3;
    std::string out = "dataset.json";
};

void run_pde_gen(const PdeGenOpts& o, const Globals& g) {
    pde::SolveSpec spec;
    spec.m = o.mesh;
    spec.tol = o.tol;
    spec.u_min = o.u_min;
    const long M = o.full ? 10000 : o.M;
    auto t0 = std::chrono::steady_clock::now();
    pde::PairDataset ds = pde::generate(M, g.seed, spec, g.threads);
    ds.save(o.out);
    double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("wrote %ld records (h = 1/%d, %d outputs each) to %s in %.1f s\n", M, o.mesh, spec.nodes(),
                o.out.c_str(), secs);
    std::printf("coefficient rejections (u < %.3g): %ld\n", spec.u_min, ds.total_rejections());
}

struct PcaOpts {
    std::string data, out_dir = "pca";
    int d = 10;
    std::string repr = "amplitude";
    long fit_samples = 1000;
};

void run_pca(const PcaOpts& o) {
    pde::PairDataset ds = load_dataset(o.data);
    InputRepr repr = parse_repr(o.repr);
    const long F = o.fit_samples > 0 ? std::min(o.fit_samples, ds.count()) : ds.count();
    if (o.d < 2 || o.d > F) throw UsageError("--d must lie in [2, fitted sample count]");
    PcaBundle b;
    b.repr = repr;
    b.fit_samples = F;
    Mat X = input_matrix(ds, repr);
    b.bx = PCABasis::fit(X.leftCols(F), o.d);
    b.by = PCABasis::fit(ds.y.leftCols(F), o.d);
    b.save(o.out_dir);

    std::printf("PCA on %ld records, d = %d, input representation %s\n", F, o.d, o.repr.c_str());
    for (const auto* side : {&b.bx, &b.by}) {
        const char* name = side == &b.bx ? "input " : "output";
        std::printf("%s: ambient %d, top-%d energy %.6f, tail %.6e, c_nu %.6e (plug-in)\n", name, side->ambient_dim,
                    o.d, side->energy_fraction(o.d), side->tail_sum(), side->c_nu);
        Vec w = side->weight_vector();
        std::printf("  weights:");
        for (Eigen::Index i = 0; i < w.size(); ++i) std::printf(" %.4e", w(i));
        std::printf("\n");
    }
    std::printf("wrote %s/pca.json\n", o.out_dir.c_str());
}

}  // namespace

void add_pde_gen(CLI::App& app, Globals& g) {
    auto o = std::make_shared<PdeGenOpts>();
    auto* sub = app.add_subcommand("pde-gen", "Sample diffusion coefficients and solve the elliptic problem");
    sub->add_option("--M", o->M, "Number of records")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_flag("--full", o->full, "Generate the full 10000-record set");
    sub->add_option("--mesh", o->mesh, "Cells per axis (1/h)")->capture_default_str()->check(CLI::Range(2, 1024));
    sub->add_option("--tol", o->tol, "CG relative residual tolerance")->capture_default_str();
    sub->add_option("--u-min", o->u_min, "Ellipticity guard")->capture_default_str();
    sub->add_option("--out", o->out, "Dataset manifest")->capture_default_str();
    sub->callback([o, &g] { run_pde_gen(*o, g); });
}

void add_pca(CLI::App& app, Globals&) {
    auto o = std::make_shared<PcaOpts>();
    auto* sub = app.add_subcommand("pca", "Fit input and output PCA bases on a dataset");
    sub->add_option("--data", o->data, "Dataset manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--out-dir", o->out_dir, "Output directory")->capture_default_str();
    sub->add_option("--d", o->d, "Truncation level")->capture_default_str();
    sub->add_option("--input-repr", o->repr, "amplitude or xi")->capture_default_str()->check(
        CLI::IsMember({"amplitude", "xi"}));
    sub->add_option("--fit-samples", o->fit_samples, "Records used for the fit (0: all)")->capture_default_str();
    sub->callback([o] { run_pca(*o); });
}

}  // namespace binn::cli
