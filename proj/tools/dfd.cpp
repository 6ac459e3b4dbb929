#include "dfd/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return dfd::cli::run(argc, argv, std::cout, std::cerr); }
