#pragma once

#include <optional>
#include <string>

#include "autoskill/context_dag.hpp"
#include "autoskill/util.hpp"

namespace autoskill {

// Loop-level runtime knobs. Defaults come from constants.hpp; the agent-home
// config file may override any of them.
struct LoopConfig {
    std::size_t tool_text_limit = constants::kToolTextLimit;
    std::chrono::seconds tool_timeout{constants::kToolTimeoutSeconds};
    std::chrono::seconds terminal_timeout{constants::kTerminalTimeoutSeconds};
    std::chrono::seconds exec_code_timeout{constants::kExecCodeTimeoutSeconds};
    std::chrono::seconds verify_completion_timeout{constants::kVerifyCompletionTimeoutSeconds};
    std::chrono::seconds model_timeout{constants::kModelTimeoutSeconds};
    int max_retry = constants::kMaxRetry;
    int verify_completion_turn_threshold = constants::kVerifyCompletionTurnThreshold;
    CompressionBudget budget{};

    // Loop hard stop; not a tuned constant, purely a runaway guard.
    int max_turns = 200;
    // Extra wait the dispatcher grants a handler beyond its timeout class
    // before abandoning it (subprocess-backed handlers kill their child at
    // the class timeout and return within this allowance).
    std::chrono::milliseconds dispatch_grace{constants::kTimeoutGraceSeconds * 1000};
};

struct RuntimeConfig {
    std::string model_id = "gpt-5.5";
    std::string endpoint;
    std::string api_key;
    LoopConfig loop;
};

// The persistent agent home: skill bank, long-term memory, sessions, staging.
class AgentHome {
public:
    explicit AgentHome(fs::path root) : root_(std::move(root)) {}

    const fs::path& root() const { return root_; }
    fs::path skills_dir() const { return root_ / "skills"; }
    fs::path sessions_dir() const { return root_ / "sessions"; }
    fs::path long_term_memory_file() const {
        return root_ / "memory" / "long_term_memory" / "memory.md";
    }
    fs::path staging_dir() const { return root_ / "staging"; }
    fs::path config_file() const { return root_ / "config.toml"; }

    bool initialized() const;
    void init() const;  // creates the scaffold, idempotent

private:
    fs::path root_;
};

// Precedence: explicit flag > AUTOSKILL_HOME > ~/.autoskill.
AgentHome resolve_home(const std::optional<fs::path>& flag);

// key = value / key: value lines; '#' comments; unknown keys ignored.
RuntimeConfig load_runtime_config(const AgentHome& home);
RuntimeConfig parse_runtime_config(const std::string& text);

}  // namespace autoskill
