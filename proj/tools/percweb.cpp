#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) { return percweb::cli::main_with_args(argc, argv, std::cout, std::cerr); }
