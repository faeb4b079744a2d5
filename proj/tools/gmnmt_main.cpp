#include <iostream>

#include "gmnmt/cli/commands.hpp"

int main(int argc, char** argv) { return gmnmt::run_cli(argc, argv, std::cout, std::cerr); }
