#include <iostream>
#include <string>
#include <vector>

#include "handcloud/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  const handcloud::cli::CommandResult r = handcloud::cli::run(args, &std::cerr);
  std::cout << r.out;
  std::cerr << r.err;
  return r.exit_code;
}
