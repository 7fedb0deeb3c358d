#include <iostream>

#include "edp_cli.hpp"

int main(int argc, char** argv) { return edp::cli::run(argc, argv, std::cout, std::cerr); }
