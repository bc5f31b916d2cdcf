#ifndef UST_TOOLS_CLI_HPP
#define UST_TOOLS_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace ust::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Runs one command line (without the program name). Report text goes to
/// `out`, diagnostics and log lines to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ust::cli

#endif  // UST_TOOLS_CLI_HPP
