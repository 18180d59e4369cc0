#include "w2gn/cli/commands.hpp"

int main(int argc, char** argv) { return w2gn::cli::run_cli(argc, argv); }
