#include "reeblab/cli.hpp"

int main(int argc, char** argv) { return reeblab::cli::main(argc, argv); }
