#include "toposculpt/cli.hpp"

int main(int argc, char** argv) { return toposculpt::cli_main(argc, argv); }
