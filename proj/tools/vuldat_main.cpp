#include "vuldat/cli.hpp"

int main(int argc, char** argv) { return vuldat::cli::run_subcommand(argc, argv); }
