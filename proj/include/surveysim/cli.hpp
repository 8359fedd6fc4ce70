// SPDX-License-Identifier: Apache-2.0
//
// Command-line entry point: build-data, train, eval, baseline, ablate, report.
#pragma once

#include <string>
#include <vector>

namespace surveysim::cli {

/// Exit code for a bad command line or config.
inline constexpr int kExitConfig = 2;
/// Exit code for a failure while running.
inline constexpr int kExitRuntime = 1;

std::string usage();

/// Runs one subcommand. `args` excludes the program name.
int dispatch(const std::vector<std::string>& args);

/// Name of the environment variable pointing at the model cache directory.
inline constexpr const char* kModelCacheEnv = "SURVEYSIM_MODEL_CACHE";

}  // namespace surveysim::cli
