#include "fsprune/cli.hpp"

int main(int argc, char** argv) { return fsprune::run_cli(argc, argv); }
