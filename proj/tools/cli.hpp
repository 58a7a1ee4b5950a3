#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace ssws::cli {

// args[0] is the program name. Exit codes: 0 ok, 1 runtime failure, 2 usage.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace ssws::cli
