#include <iostream>

#include "skbf/cli.hpp"

int main(int argc, char** argv) { return skbf::cli::run(argc, argv, std::cout, std::cerr); }
