#include "fct/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return fct::cli::run_cli(argc, argv, std::cout, std::cerr); }
