// Command-line surface. Exit codes: 0 success, 1 runtime failure, 2 usage or
// config error. Every run echoes its fully resolved configuration to the
// output directory.
#pragma once

namespace vdm::cli {

int run(int argc, const char* const* argv);

}  // namespace vdm::cli
