#include <iostream>
#include <string>
#include <vector>

#include "vfq/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv + 1, argv + argc);
    return vfq::run_cli(args, std::cout, std::cerr);
}
