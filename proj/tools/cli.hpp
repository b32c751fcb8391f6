#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace tomloom::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitInternal = 2;

/// Runs one command line (without the program name). Exit codes: 0 success,
/// 1 bad input or configuration, 2 internal failure.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace tomloom::cli
