#include <iostream>
#include <string>
#include <vector>

#include "agglomg/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return agglomg::run_cli(args, std::cout, std::cerr);
}
