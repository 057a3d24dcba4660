// Copyright (c) 2026, numprobe authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "numprobe_cli/commands.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv + 1, argv + argc);
  return numprobe::cli::run_cli(args, std::cout, std::cerr);
}
