#include <string>
#include <vector>

#include "dgcn/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dgcn::run_cli(args);
}
