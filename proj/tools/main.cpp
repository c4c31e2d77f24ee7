#include <iostream>

#include "keyformer/cli/cli.hpp"

int main(int argc, char** argv) { return keyformer::cli::run(argc, argv, std::cout, std::cerr); }
