#pragma once

namespace dropf_cli {

/// Full command-line surface of the dropf tool. Returns the process exit
/// code: 0 success, 2 validation/input error, 3 solve failure.
int run_cli(int argc, const char* const* argv);

}  // namespace dropf_cli
