#include "cli.hpp"

#include "binn/parallel.hpp"

#include <cstdio>
#include <cstdlib>
#include <exception>

namespace binn::cli {

int run(int argc, char** argv) {
    Globals g;
    g.threads = default_threads();
    if (const char* env = std::getenv("INN_SEED")) {
        try {
            g.seed = std::stoull(env);
        } catch (const std::exception&) {
            std::fprintf(stderr, "error: INN_SEED must be a non-negative integer\n");
            return 2;
        }
    }

    CLI::App app{"Bi-Lipschitz invertible networks: constructions, PDE data, training", "inn"};
    app.require_subcommand(1);
    app.add_option("--seed", g.seed, "Base seed (env INN_SEED)")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
    app.add_flag("--deterministic", g.deterministic, "Single-threaded, bitwise reproducible runs");
    app.parse_complete_callback([&g] {
        if (g.deterministic) g.threads = 1;
    });

    add_construct(app, g);
    add_rate_study(app, g);
    add_pde_gen(app, g);
    add_pca(app, g);
    add_train(app, g);
    add_eval(app, g);
    add_verify(app, g);

    try {
        app.parse(argc, argv);
    } catch (const CLI::RuntimeError& e) {
        return e.get_exit_code();
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const UsageError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace binn::cli
