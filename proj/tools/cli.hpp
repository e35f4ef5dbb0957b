#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace celluda::cli {

enum ExitCode : int
{
    kOk = 0,
    kUsage = 2,
    kData = 3,
    kDivergence = 4,
};

/// Runs one command line (without the program name). Progress goes to `err`,
/// requested output such as help text to `out`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace celluda::cli
