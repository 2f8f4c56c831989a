#include "omegaflow/cli.hpp"

int main(int argc, char** argv) { return omegaflow::cli::main_entry(argc, argv); }
