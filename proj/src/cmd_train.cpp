#include "util.hpp"

#include "binn/parallel.hpp"
#include "binn/svg.hpp"

#include <cstdio>
#include <memory>

namespace binn::cli {

namespace {

struct TrainOpts {
    std::string data, pca = "pca";
    long n_train = 100, n_test = 1000;
    long steps = 20000;
    double c0 = 1e-3, lr = 1e-3;
    int blocks = 3, hidden = 32;
    double s_max = 5.0;
    long batch = 0, record_every = 200, early_stop = 0;
    std::string out = "model.json", final_out, metrics = "metrics.csv", plot;
};

TrainConfig make_config(const TrainOpts& o, int dim, std::uint64_t seed) {
    TrainConfig cfg;
    cfg.arch.dim = dim;
    cfg.arch.blocks = o.blocks;
    cfg.arch.hidden = o.hidden;
    cfg.arch.s_max = o.s_max;
    cfg.c0 = o.c0;
    cfg.adam.lr = o.lr;
    cfg.max_steps = o.steps;
    cfg.batch = o.batch;
    cfg.seed = seed;
    cfg.record_every = o.record_every;
    cfg.early_stop_window = o.early_stop;
    return cfg;
}

Pipeline load_pipeline(const std::string& data, const std::string& pca, long n_train, long n_test) {
    pde::PairDataset ds = load_dataset(data);
    PcaBundle b = load_pca(pca);
    if (n_train + n_test > ds.count())
        throw UsageError("dataset has " + std::to_string(ds.count()) + " records; need n-train + n-test");
    if (b.bx.truncation % 2 != 0) throw UsageError("coupling blocks need an even reduced dimension");
    return apply_pipeline(std::move(b.bx), std::move(b.by), ds, n_train, n_test, b.repr);
}

void run_train(const TrainOpts& o, const Globals& g) {
    Pipeline p = load_pipeline(o.data, o.pca, o.n_train, o.n_test);
    TrainConfig cfg = make_config(o, p.bx.truncation, g.seed);
    CouplingINN model = CouplingINN::init(cfg.arch, cfg.seed);
    std::printf("training %zu parameters on |T_r| = %ld, |T_e| = %ld for %ld steps\n", model.param_count(),
                o.n_train, o.n_test, o.steps);
    TrainResult r = train(std::move(model), p.data, cfg);
    save_checkpoint(o.out, r.best_model, cfg, r.best_step);
    if (!o.final_out.empty()) save_checkpoint(o.final_out, r.final_model, cfg, r.steps);
    io::write_text(o.metrics, history_csv(r.history));
    std::printf("best snapshot at step %ld: e_a fwd %.4e inv %.4e, e_g fwd %.4e inv %.4e\n", r.best_step,
                r.best.e_a_fwd, r.best.e_a_inv, r.best.e_g_fwd, r.best.e_g_inv);
    std::printf("smallest e_g along the trajectory: fwd %.4e inv %.4e\n", r.min_e_g_fwd, r.min_e_g_inv);
    std::printf("inverse e_g semi-convergence: %s\n", semi_converged(r.history) ? "yes" : "no");
    if (!o.plot.empty()) {
        svg::Series a{"e_g_fwd", {}, {}}, b{"e_g_inv", {}, {}}, c{"e_a_fwd", {}, {}}, d{"e_a_inv", {}, {}};
        for (const auto& h : r.history) {
            for (auto* s : {&a, &b, &c, &d}) s->x.push_back(static_cast<double>(h.step));
            a.y.push_back(h.m.e_g_fwd);
            b.y.push_back(h.m.e_g_inv);
            c.y.push_back(h.m.e_a_fwd);
            d.y.push_back(h.m.e_a_inv);
        }
        io::write_text(o.plot, svg::line_chart("relative errors vs step", {a, b, c, d}, false, true));
    }
}

struct EvalOpts : TrainOpts {
    std::vector<long> sizes{100, 500, 1000};
    std::string checkpoint;
    bool fnn = false;
    int fnn_hidden = 64;
};

void print_row(long nt, const char* method, const Metrics& m) {
    std::printf("%6ld  %-4s  %10.3e  %10.3e  %10.3e  %10.3e\n", nt, method, m.e_a_fwd, m.e_g_fwd, m.e_a_inv,
                m.e_g_inv);
}

void run_eval(const EvalOpts& o, const Globals& g) {
    std::printf("%6s  %-4s  %10s  %10s  %10s  %10s\n", "|T_r|", "net", "e_a fwd", "e_g fwd", "e_a inv", "e_g inv");
    if (!o.checkpoint.empty()) {
        Checkpoint c = load_checkpoint(o.checkpoint);
        Pipeline p = load_pipeline(o.data, o.pca, o.n_train, o.n_test);
        if (c.model.dim() != p.bx.truncation) throw UsageError("checkpoint dimension does not match the PCA bases");
        print_row(o.n_train, "INN", relative_errors(c.model, p.data));
        return;
    }
    pde::PairDataset ds = load_dataset(o.data);
    PcaBundle b = load_pca(o.pca);
    for (long nt : o.sizes)
        if (nt + o.n_test > ds.count())
            throw UsageError("dataset too small for |T_r| = " + std::to_string(nt) + " and |T_e| = " +
                             std::to_string(o.n_test));

    // One job per (size, method); each run is sequential.
    struct Job {
        long nt;
        bool fnn;
        Metrics m;
    };
    std::vector<Job> jobs;
    for (long nt : o.sizes) {
        jobs.push_back({nt, false, {}});
        if (o.fnn) jobs.push_back({nt, true, {}});
    }
    parallel_for(jobs.size(), g.threads, [&](std::size_t k) {
        Job& j = jobs[k];
        Pipeline p = apply_pipeline(b.bx, b.by, ds, j.nt, o.n_test, b.repr);
        if (j.fnn) {
            j.m = train_fnn(p.data, o.fnn_hidden, o.steps, o.lr, g.seed, o.record_every).best;
        } else {
            TrainConfig cfg = make_config(o, p.bx.truncation, g.seed);
            TrainResult r = train(CouplingINN::init(cfg.arch, cfg.seed), p.data, cfg);
            j.m = r.best;
            j.m.e_g_fwd = r.min_e_g_fwd;
            j.m.e_g_inv = r.min_e_g_inv;
        }
    });
    for (const auto& j : jobs) print_row(j.nt, j.fnn ? "FNN" : "INN", j.m);
}

void add_train_options(CLI::App* sub, TrainOpts& o) {
    sub->add_option("--data", o.data, "Dataset manifest")->required()->check(CLI::ExistingFile);
    sub->add_option("--pca", o.pca, "Directory written by the pca command")->capture_default_str();
    sub->add_option("--n-test", o.n_test, "|T_e|, taken from the end of the dataset")->capture_default_str();
    sub->add_option("--steps", o.steps, "Adam steps")->capture_default_str();
    sub->add_option("--c0", o.c0, "Inverse-loss penalty")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--lr", o.lr, "Learning rate")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--blocks", o.blocks, "Coupling blocks")->capture_default_str()->check(CLI::Range(1, 64));
    sub->add_option("--hidden", o.hidden, "Subnet hidden width")->capture_default_str()->check(CLI::Range(1, 4096));
    sub->add_option("--s-max", o.s_max, "Exponent clamp")->capture_default_str()->check(CLI::PositiveNumber);
    sub->add_option("--batch", o.batch, "Minibatch size (0: full batch)")->capture_default_str();
    sub->add_option("--record-every", o.record_every, "Metric cadence in steps")->capture_default_str()->check(
        CLI::PositiveNumber);
}

}  // namespace

void add_train(CLI::App& app, Globals& g) {
    auto o = std::make_shared<TrainOpts>();
    auto* sub = app.add_subcommand("train", "Train the coupling network on PCA-reduced pairs");
    add_train_options(sub, *o);
    sub->add_option("--n-train", o->n_train, "|T_r|, taken from the start of the dataset")->capture_default_str();
    sub->add_option("--early-stop", o->early_stop, "Records without improvement before stopping (0: off)")
        ->capture_default_str();
    sub->add_option("--out", o->out, "Checkpoint of the best snapshot")->capture_default_str();
    sub->add_option("--final", o->final_out, "Also write the final model here");
    sub->add_option("--metrics", o->metrics, "Metrics CSV")->capture_default_str();
    sub->add_option("--plot", o->plot, "Write an SVG chart of the metrics");
    sub->callback([o, &g] { run_train(*o, g); });
}

void add_eval(CLI::App& app, Globals& g) {
    auto o = std::make_shared<EvalOpts>();
    auto* sub = app.add_subcommand("eval", "Report e_a / e_g for several training-set sizes");
    add_train_options(sub, *o);
    sub->add_option("--sizes", o->sizes, "Training-set sizes")->capture_default_str()->delimiter(',');
    sub->add_option("--checkpoint", o->checkpoint, "Evaluate this checkpoint instead of training")->check(
        CLI::ExistingFile);
    sub->add_option("--n-train", o->n_train, "|T_r| used with --checkpoint")->capture_default_str();
    sub->add_flag("--fnn", o->fnn, "Also train the fully connected baseline");
    sub->add_option("--fnn-hidden", o->fnn_hidden, "Baseline hidden width")->capture_default_str();
    sub->callback([o, &g] { run_eval(*o, g); });
}

}  // namespace binn::cli
