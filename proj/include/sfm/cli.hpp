#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace sfm {

/// Entry point of the sfm tool. Exit codes: 0 ok, 1 failed verification,
/// 2 invalid configuration or input.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace sfm
