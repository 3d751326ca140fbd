#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace hypass::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kArgumentError = 2;
inline constexpr int kDataError = 3;
inline constexpr int kCheckFailed = 4;

// Commands: gen, run, sweep, verify-theory. args excludes the program name.
// Reads HYPASS_OUTPUT_ROOT for the default output root (else "runs").
int main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

std::string version();

}  // namespace hypass::cli
