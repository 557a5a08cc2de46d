#include <iostream>

#include "rbayes/cli.hpp"

int main(int argc, char** argv) {
    return rbayes::cli::run(argc, argv, std::cout, std::cerr);
}
