#include <iostream>

#include "tricache/cli.hpp"

int main(int argc, char** argv) { return tricache::run_cli(argc, argv, std::cout, std::cerr); }
