#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace kgring {

// Exit codes of the kgring binary.
inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 1;       // bad config, I/O, solver failure
inline constexpr int kExitValidation = 2;  // coupling or lemma check failed

// args excludes the program name.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace kgring
