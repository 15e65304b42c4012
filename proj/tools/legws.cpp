#include <iostream>

#include "legws/cli.hpp"

int main(int argc, char** argv) { return legws::run_cli(argc, argv, std::cout, std::cerr); }
