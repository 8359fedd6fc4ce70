// SPDX-License-Identifier: Apache-2.0
#include <string>
#include <vector>

#include "surveysim/cli.hpp"

int main(int argc, char** argv) {
  return surveysim::cli::dispatch(std::vector<std::string>(argv + 1, argv + argc));
}
