#include <iostream>

#include "arpsim/cli.hpp"

int main(int argc, char** argv) { return arpsim::cli_main(argc, argv, std::cout, std::cerr); }
