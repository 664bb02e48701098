#pragma once

#include <string>
#include <vector>

namespace mhdlab {

extern const char* const kVersion;

// Entry point of the mhdlab tool. Returns 0 on success, 2 on validation errors (including bad
// flags), 3 when --strict is set and a numerical tolerance check fails.
int run_cli(int argc, const char* const* argv);
int run_cli(const std::vector<std::string>& args);

} // namespace mhdlab
