#include <iostream>

#include "keysim/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return keysim::run_cli(args, std::cout, std::cerr);
}
