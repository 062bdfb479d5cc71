#pragma once

#include <ostream>

namespace mixvol::cli {

/// Runs the built-in example suite; returns the process exit status.
int run_selftest(std::ostream& out);

} // namespace mixvol::cli
