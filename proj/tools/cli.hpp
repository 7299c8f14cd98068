#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace fnroot::cli {

/// Environment variable naming the workspace when --workspace is absent.
inline constexpr const char* kWorkspaceEnv = "FNROOT_WORKSPACE";
inline constexpr const char* kDefaultWorkspace = "fnroot-workspace";

/// Runs one command line (without the program name) and returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace fnroot::cli
