// Copyright 2026 The danet Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <iostream>

#include "danet/cli.h"

int main(int argc, char** argv) {
  return danet::cli::run(argc, argv, std::cout, std::cerr);
}
