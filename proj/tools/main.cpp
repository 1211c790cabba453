#include "cbfal/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return cbfal::cli::main(argc, argv, std::cout, std::cerr); }
