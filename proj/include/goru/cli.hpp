#ifndef GORU_CLI_HPP
#define GORU_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace goru {

/// Entry point of the `goru` tool. Subcommands: train, gradcheck, gen,
/// probe-gates, params. Returns the process exit code; usage errors print
/// the relevant help text to `err` and return 2.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Same, with `args` excluding the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace goru

#endif  // GORU_CLI_HPP
