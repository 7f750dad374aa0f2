#pragma once

namespace tbd {

/// Entry point of the tbd_bp command line tool.
/// Exit codes: 0 success, 1 unexpected failure, 2 configuration or usage error,
/// 3 data-format error.
int run_cli(int argc, char** argv);

}  // namespace tbd
