#include <iostream>

#include "seal/cli.hpp"

int main(int argc, char** argv) { return seal::cli::run(argc, argv, std::cout, std::cerr); }
