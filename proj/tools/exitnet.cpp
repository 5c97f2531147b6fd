#include <iostream>
#include <string>
#include <vector>

#include "exitnet/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return exitnet::cli::run(args, std::cout, std::cerr);
}
