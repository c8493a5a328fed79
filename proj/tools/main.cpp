#include <iostream>

#include "imech/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return imech::run_cli(args, std::cout, std::cerr);
}
