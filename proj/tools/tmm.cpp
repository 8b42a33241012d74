#include <iostream>

#include "tmm/cli.hpp"

int main(int argc, char** argv) { return tmm::run_cli(argc, argv, std::cout, std::cerr); }
