#pragma once

#include <iosfwd>

#include "keyformer/core/precision.hpp"

KEYFORMER_BEGIN_NAMESPACE
namespace cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// Entry point of the `keyformer` tool. Subcommands: ingest, synth, split,
/// train, evaluate, embed, enroll, verify, serve.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace cli
KEYFORMER_END_NAMESPACE
