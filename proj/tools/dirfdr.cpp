#include <iostream>
#include <string>
#include <vector>

#include "dirfdr/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return dirfdr::dispatch(args, std::cout, std::cerr);
}
