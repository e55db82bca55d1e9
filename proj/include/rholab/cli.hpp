#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace rholab::cli {

/// Runs one CLI invocation (argv without the program name) and returns the
/// process exit code: 0 on success, 2 for argument/configuration problems,
/// 3 when a numerical guard trips or a verification criterion fails.  Output
/// streams are injected so tests can capture them.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace rholab::cli
