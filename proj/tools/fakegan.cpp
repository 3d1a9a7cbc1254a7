#include <iostream>
#include <string>
#include <vector>

#include "fakegan/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return fakegan::cli_dispatch(args, std::cout, std::cerr);
}
