#include <iostream>
#include <string>
#include <vector>

#include "rpdlab/cli.h"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return rpdlab::run_cli(args, std::cout, std::cerr);
}
