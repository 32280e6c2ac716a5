#pragma once

#include <iostream>
#include <string>
#include <vector>

namespace csc::cli {

// Dispatches a full command line (without argv[0]). Returns the process
// exit code: 0 success, 1 usage error, 2 data/validation error, 3 numerical
// failure. The last line written to err is a machine-parsable status.
int run(const std::vector<std::string>& args, std::ostream& out = std::cout,
        std::ostream& err = std::cerr);

}  // namespace csc::cli
