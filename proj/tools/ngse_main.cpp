#include <iostream>
#include <string>
#include <vector>

#include "ngse/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return ngse::cli::run(args, std::cout, std::cerr);
}
