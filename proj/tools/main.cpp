#include "bitforge/cli.hpp"

int main(int argc, char** argv) { return bitforge::cli::run_cli(argc, argv); }
