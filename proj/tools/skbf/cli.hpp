#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace skbf::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

/// Runs one `skbf` invocation. Usage errors return 2 after printing help to
/// `err`; runtime failures print "error [module]: message" and return 1.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload for tests: `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace skbf::cli
