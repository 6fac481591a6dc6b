#include "warmsim/cli.hpp"

int main(int argc, char** argv) { return warmsim::run_cli(argc, argv); }
