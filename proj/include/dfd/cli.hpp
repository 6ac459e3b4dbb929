#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace dfd::cli {

// Exit codes: 0 when every requested artifact was produced, 1 on a runtime
// failure, 2 on a usage error.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace dfd::cli
