#pragma once

namespace bridgecat {

/// Dispatches the command line. Exit codes: 0 success, 1 usage error,
/// 2 data/processing error.
int cli_main(int argc, char** argv);

} // namespace bridgecat
