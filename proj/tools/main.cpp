#include <iostream>

#include "bfctl/cli.hpp"

int main(int argc, char** argv) { return bfctl::cli::run(argc, argv, std::cout, std::cerr); }
