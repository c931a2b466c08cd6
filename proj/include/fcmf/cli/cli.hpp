#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace fcmf::cli {

// Exit codes: 0 success, 1 usage or validation error, 2 runtime failure.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInvalid = 1;
inline constexpr int kExitFailure = 2;

// args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace fcmf::cli
