#include <iostream>
#include <string>
#include <vector>

#include "mup/cli.hpp"
#include "mup/sweep.hpp"

int main(int argc, char** argv) {
  mup::tune_allocator();
  std::vector<std::string> args(argv + 1, argv + argc);
  return mup::run_cli(args, std::cout, std::cerr);
}
