#include <iostream>

#include "emip/cli.hpp"

int main(int argc, char** argv) { return emip::cli::run(argc, argv, std::cout, std::cerr); }
