#include <iostream>
#include <string>
#include <vector>

#include "adsgnn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return adsgnn::cli::run(args, std::cout, std::cerr);
}
