#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace signflow {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitRuntime = 3 };

/// Entry point behind the `signflow` executable. `args` excludes the program
/// name. Machine output (JSON / JSON lines) goes to `out`, prose to `err`;
/// `stream` reads frame records from `in` unless --listen is given.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace signflow
