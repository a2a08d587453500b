#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace latent_rank::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitNonconverged = 2;
inline constexpr int kExitInadmissible = 3;
inline constexpr int kExitUsage = 64;
inline constexpr int kExitNotPositiveDefinite = 65;
inline constexpr int kExitNoInput = 66;
inline constexpr int kExitInternal = 70;
inline constexpr int kExitCannotWrite = 73;

/// Runs one subcommand (fit, diagnose, rank-scan, simulate, shapiro, validate) and
/// returns the process exit code. Nothing is written to std::cout / std::cerr directly.
[[nodiscard]] int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace latent_rank::cli
