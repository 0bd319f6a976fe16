#include <iostream>
#include <string>
#include <vector>

#include "cpt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return cpt::cli::run(args, std::cout, std::cerr);
}
