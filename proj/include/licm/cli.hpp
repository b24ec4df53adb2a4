#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace licm::cli {

// Runs one subcommand. `args` excludes the program name. Returns 0 on
// success, 1 on a runtime failure (one JSON line on `err`) and 2 on a usage
// error (usage text on `err`).
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace licm::cli
