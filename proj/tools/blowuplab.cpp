#include "blowuplab/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return blowup::cli::run(argc, argv, std::cout, std::cerr); }
