#include <iostream>

#include "stedit/cli.hpp"

int main(int argc, char** argv) { return stedit::run_cli(argc, argv, std::cout, std::cerr); }
