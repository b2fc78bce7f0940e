#include <iostream>

#include "ddest/cli.hpp"

int main(int argc, char** argv) { return ddest::run_cli(argc, argv, std::cout, std::cerr); }
