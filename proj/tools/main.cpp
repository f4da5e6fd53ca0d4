#include <iostream>
#include <string>
#include <vector>

#include "transprompt/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return transprompt::run_cli(args, std::cout, std::cerr);
}
