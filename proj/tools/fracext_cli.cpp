#include "fracext/cli.hpp"

int main(int argc, char** argv) { return fracext::run_cli(argc, argv); }
