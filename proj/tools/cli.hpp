#pragma once

namespace lgmc::cli {

// Exit codes shared by every subcommand.
enum ExitCode : int {
    kOk = 0,
    kFailure = 1,  // a check ran and did not pass (gradcheck)
    kFormat = 2,   // unreadable input, bad arguments
    kShape = 3,
    kResource = 4,
    kDomain = 5,
};

// Runs the lgmc command line in-process and returns the exit code.
int run(int argc, char** argv);

}  // namespace lgmc::cli
