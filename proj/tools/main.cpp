#include <iostream>

#include "intercity/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return intercity::run_cli(args, std::cout, std::cerr);
}
