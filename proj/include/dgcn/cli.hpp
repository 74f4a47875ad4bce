#pragma once

#include <string>
#include <vector>

namespace dgcn {

// Whole command-line surface, callable in-process. args excludes the program
// name. Exit codes: 0 ok, 1 failed check/ablation cell, 2 usage or config
// error, 3 numeric failure.
int run_cli(const std::vector<std::string>& args);

}  // namespace dgcn
