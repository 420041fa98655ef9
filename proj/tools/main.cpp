#include <iostream>

#include "nmd/cli/cli.hpp"

int main(int argc, char** argv) { return nmd::cli::run({argv + 1, argv + argc}, std::cout, std::cerr); }
