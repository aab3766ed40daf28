#include <iostream>

#include "lorenzlab/cli.hpp"

int main(int argc, char** argv) { return lorenzlab::cli::run(argc, argv, std::cout, std::cerr); }
