#include <iostream>

#include "shapemed/cli.hpp"

int main(int argc, char** argv) { return shapemed::cli::run(argc, argv, std::cout, std::cerr); }
