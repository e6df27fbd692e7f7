#include "sonoguide/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return sonoguide::run_cli(argc, argv, std::cout, std::cerr); }
