#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace alm::cli {

enum ExitCode : int {
    kOk = 0,
    kParseError = 1,
    kNotConverged = 2,
    kInfeasible = 3,
    kExperimentFailed = 4,
};

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run(int argc, char** argv);

}  // namespace alm::cli
