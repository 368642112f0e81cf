#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace koa::cli {

// Exit statuses: 0 success, 1 failed invariant or missing artifact, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace koa::cli
