#pragma once

#include <cstdint>
#include <iosfwd>
#include <string_view>

namespace v2g {

inline constexpr std::string_view kVersion = "0.1.0";

// Exit codes of the v2g tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDivergence = 4,
  kExitInfeasible = 5,
  kExitNotConverged = 6,
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes);

/// Entry point of the v2g tool: v2g <train|predict|optimize|sweep|gen-synth>
/// --config FILE [overrides]. Human output goes to out; failures print one
/// line "error: code=<n> kind=<kind> message=<text>" to err.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace v2g
