#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bleloc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitUser = 2;

/// Entry point behind the `bleloc` executable. `args` excludes the program
/// name. Diagnostics go to `err` as one line: `error: <Code>: <message>`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bleloc::cli
