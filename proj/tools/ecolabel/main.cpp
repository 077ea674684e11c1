#include <iostream>

#include "ecolabel/cli.hpp"

int main(int argc, char** argv) {
    return ecolabel::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
