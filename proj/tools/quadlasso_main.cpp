#include <iostream>
#include <string>
#include <vector>

#include "quadlasso/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return quadlasso::run_command(args, std::cout, std::cerr);
}
