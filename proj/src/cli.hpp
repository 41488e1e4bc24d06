#pragma once

#include "binn/common.hpp"

#include <CLI11.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace binn::cli {

// Bad input files or flag combinations; mapped to exit code 2.
class UsageError : public Error {
public:
    using Error::Error;
};

struct Globals {
    std::uint64_t seed = 7;
    int threads = 1;
    bool deterministic = false;
};

void add_construct(CLI::App& app, Globals& g);
void add_rate_study(CLI::App& app, Globals& g);
void add_pde_gen(CLI::App& app, Globals& g);
void add_pca(CLI::App& app, Globals& g);
void add_train(CLI::App& app, Globals& g);
void add_eval(CLI::App& app, Globals& g);
void add_verify(CLI::App& app, Globals& g);

// Parses argv and dispatches; returns the process exit code.
int run(int argc, char** argv);

}  // namespace binn::cli
