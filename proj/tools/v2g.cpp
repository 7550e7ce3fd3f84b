#include <iostream>

#include "v2g/cli.hpp"

int main(int argc, char** argv) { return v2g::run_cli(argc, argv, std::cout, std::cerr); }
