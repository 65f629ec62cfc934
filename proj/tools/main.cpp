#include <iostream>
#include <string>
#include <vector>

#include "bleloc/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bleloc::cli::run(args, std::cout, std::cerr);
}
