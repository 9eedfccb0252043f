#include <iostream>
#include <string>
#include <vector>

#include "dirx/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dirx::run_cli(args, std::cout, std::cerr);
}
