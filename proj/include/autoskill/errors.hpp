#pragma once

#include <stdexcept>
#include <string>

namespace autoskill {

// Domain error codes, one per named failure mode across the runtime.
enum class ErrorCode {
    // skill packages
    missing_frontmatter,
    missing_required_key,
    name_mismatch,
    malformed_name,
    destination_exists,
    invalid_package,
    // skill bank
    evaluation_failed,
    duplicate_name,
    unknown_skill,
    // context DAG
    cycle_detected,
    broken_history_link,
    // memory
    empty_content,
    // sessions
    home_not_initialized,
    sequence_gap,
    snapshot_missing,
    snapshot_corrupt,
    already_finalized,
    // sandbox
    backend_unavailable,
    sandbox_closed,
    path_escape,
    not_found,
    sandbox_failure,
    // model client / loop
    model_transient_failure,
    model_permanent_failure,
    model_exhausted_retries,
    loop_aborted,
    // lifecycle
    generation_invalid,
    refinement_exhausted,
    source_not_successful,
    // misc
    io_failure,
    usage_error,
};

const char* to_string(ErrorCode code);

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

}  // namespace autoskill
