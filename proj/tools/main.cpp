#include "../src/cli.hpp"

int main(int argc, char** argv) { return binn::cli::run(argc, argv); }
