#pragma once

#include <ostream>

namespace seal::cli {

// Runs one `seal` invocation. Exit status: 0 ok, 1 runtime/data failure,
// 2 usage or validation failure.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace seal::cli
