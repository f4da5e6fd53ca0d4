#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace transprompt {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;      // contract, parse, schema, validation errors
inline constexpr int kExitTransport = 2;  // transport or credential failures
inline constexpr int kExitCheckFailed = 3;  // oracle-check ran but a property failed

/// Entry point shared by the executable and the in-process tests.
/// args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace transprompt
