#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace relgraph::cli {

enum ExitCode : int {
    kSuccess = 0,
    kInputError = 2,
    kIoError = 3,
    kDegenerate = 4,
};

/// Entry point shared by the executable and the integration tests.
/// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace relgraph::cli
