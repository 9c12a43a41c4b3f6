#pragma once

#include <string>
#include <vector>

namespace pw {

// argv-style arguments excluding the program name. Returns the process exit
// code: 0 success, 1 validation/usage error, 2 runtime or numeric error.
int cli_run(std::vector<std::string> args);

}  // namespace pw
