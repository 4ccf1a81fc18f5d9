#include <iostream>

#include "hsir/cli.hpp"

int main(int argc, char** argv) {
    return hsir::run_cli(argc, argv, std::cout, std::cerr);
}
