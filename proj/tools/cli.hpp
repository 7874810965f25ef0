#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dsse::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kDomainError = 1;
inline constexpr int kUsageError = 2;

/// Run the command line `args` (without the program name). Diagnostics go to
/// `err`, summaries to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dsse::cli
