#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace jouletrace {

/// Parses and runs one command-line invocation. `args` excludes the
/// program name. Exit status: 0 success, 1 experiment or input failure,
/// 2 usage error.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out,
                 std::ostream& err);

/// main() adapter writing to stdout/stderr.
int cli_dispatch(int argc, const char* const* argv);

} // namespace jouletrace
