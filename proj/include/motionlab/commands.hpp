#pragma once
// Named subcommands shared by the CLI and the C API. Each invocation
// creates one fresh run directory holding a config snapshot, a JSON-lines
// run log, and the command's artifacts.

#include <map>
#include <set>
#include <string>
#include <vector>

namespace motionlab {

// Runs one subcommand. `overrides` carries only the key=value pairs the
// caller set explicitly; a config file named by the "config" key fills
// unset keys, and built-in defaults fill the rest, so explicit flags win
// over the file and the file wins over defaults. Throws Error on failure.
void run_command(const std::string& name, const std::map<std::string, std::string>& overrides);

std::vector<std::string> command_names();

// keys a command accepts, including the common ones
std::set<std::string> command_keys(const std::string& name);

} // namespace motionlab
