#include "spindisk/cli.hpp"

int main(int argc, char** argv) { return spindisk::cli::main(argc, argv); }
