#include <iostream>
#include <string>
#include <vector>

#include "a2net/cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return a2net::cli::run_cli(args, std::cout, std::cerr);
}
