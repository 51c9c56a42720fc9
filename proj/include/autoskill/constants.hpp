#pragma once

#include <cstddef>

// Runtime constants. All defaults are overridable through the agent-home
// config file; see LoopConfig and CompressionBudget.
namespace autoskill::constants {

// Context compression.
inline constexpr std::size_t kCompressTokenThreshold = 180'000;      // total-context trigger
inline constexpr std::size_t kNodeCompressTokenThreshold = 15'000;   // per-node trigger
inline constexpr int kKeepFirstTurns = 5;   // oldest turns kept verbatim
inline constexpr int kKeepLastTurns = 5;    // most recent turns kept verbatim

// Tool execution.
inline constexpr std::size_t kToolTextLimit = 8'192;   // chars, per-call tool output cap
inline constexpr int kToolTimeoutSeconds = 300;
inline constexpr int kTerminalTimeoutSeconds = 60;
inline constexpr int kExecCodeTimeoutSeconds = 60;
inline constexpr int kVerifyCompletionTimeoutSeconds = 120;
inline constexpr int kModelTimeoutSeconds = 300;

// Retry and verification.
inline constexpr int kMaxRetry = 5;
inline constexpr int kVerifyCompletionTurnThreshold = 4;

// Skill bank maintenance defaults (configurable, not fixed by the runtime).
inline constexpr int kPruneUnusedSessions = 20;
inline constexpr int kPruneConsecutiveFailures = 3;

// Process kill allowance on top of a timeout.
inline constexpr int kTimeoutGraceSeconds = 5;

}  // namespace autoskill::constants
