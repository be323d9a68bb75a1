#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aghq::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Runs one command. `args` excludes the program name. Results go to `out`
/// (or the --out file), warnings and errors to `err` as one-line JSON.
int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

int run(int argc, const char *const *argv);

/// Help text of the top-level command or of one subcommand.
std::string help(const std::string &subcommand = {});

} // namespace aghq::cli
