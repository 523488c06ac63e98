#include <iostream>

#include "tfx/cli.hpp"

int main(int argc, char** argv) { return tfx::cli::run(argc, argv, std::cout, std::cerr); }
