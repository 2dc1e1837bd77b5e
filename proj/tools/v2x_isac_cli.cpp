#include <iostream>
#include <string>
#include <vector>

#include "v2x_isac/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return v2x_isac::cli::run(args, std::cout, std::cerr);
}
