#include "goru/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return goru::run_cli(argc, argv, std::cout, std::cerr); }
