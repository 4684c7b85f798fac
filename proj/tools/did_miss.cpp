#include <iostream>

#include "didmiss/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return didmiss::cli::run(args, std::cout, std::cerr);
}
