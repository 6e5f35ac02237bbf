#include <iostream>

#include "bayesreloc/cli.hpp"

int main(int argc, char** argv) { return bayesreloc::run_cli(argc, argv, std::cout, std::cerr); }
