#include <iostream>

#include "mfce/cli.hpp"

int main(int argc, char** argv) { return mfce::run_cli(argc, argv, std::cout, std::cerr); }
