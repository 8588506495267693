#include <iostream>

#include "mner/cli.hpp"

int main(int argc, char** argv) { return mner::run_cli(argc, argv, std::cout, std::cerr); }
