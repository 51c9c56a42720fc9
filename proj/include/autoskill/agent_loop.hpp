#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "autoskill/home.hpp"
#include "autoskill/model_client.hpp"
#include "autoskill/sandbox.hpp"
#include "autoskill/session_store.hpp"
#include "autoskill/skill_bank.hpp"
#include "autoskill/skill_lifecycle.hpp"

namespace autoskill {

// Injected sleeper for retry backoff; tests record durations instead of
// sleeping.
using SleepFn = std::function<void(std::chrono::milliseconds)>;
SleepFn real_sleep();

enum class TimeoutClass { generic, terminal, exec_code, verify, none };
std::chrono::seconds timeout_for(TimeoutClass cls, const LoopConfig& cfg);

struct ToolEnv;
using ToolHandler = std::function<std::string(const ojson& args, ToolEnv& env)>;

struct ToolSpec {
    std::string name;
    std::string description;
    ojson parameters;  // JSON-schema-shaped argument description
    TimeoutClass timeout_class = TimeoutClass::generic;
    ToolHandler handler;
};

class ToolRegistry {
public:
    void add(ToolSpec spec);
    const ToolSpec* find(const std::string& name) const;
    bool has(const std::string& name) const { return find(name) != nullptr; }
    std::vector<std::string> names() const;
    ojson schema_json() const;  // what the model sees

    // All built-ins: skill_create, web_search (stub), read_skill, terminal,
    // create_sandbox, sandbox_run, sandbox_upload, sandbox_download,
    // close_sandbox, verify_completion, final_answer, append_memory.
    static ToolRegistry builtins();

private:
    std::map<std::string, ToolSpec> tools_;
};

// Everything a tool handler may touch during a run.
struct ToolEnv {
    SessionWorkspace* ws = nullptr;
    SkillBank* bank = nullptr;
    SandboxManager* sandboxes = nullptr;
    ModelClient* model = nullptr;
    const LoopConfig* cfg = nullptr;
    AgentHome* home = nullptr;
    TimeSource clock;
    int turn_index = 0;
    std::string web_corpus;  // canned web_search results; empty = unavailable
    // The agent's scratch tree: terminal cwd, sandbox upload sources,
    // download targets, final-answer output paths. Kept outside the session
    // record so the workspace holds only the Appendix-layout files.
    fs::path work_dir;

    // skill execution bookkeeping
    std::string current_skill;
    std::map<std::string, bool> skill_outcomes;  // name -> still-successful

    // set when final_answer is accepted
    std::optional<std::string> final_message;
    std::vector<fs::path> final_outputs;
};

// Clamps tool output to `limit` characters; oversized text keeps its head
// and gains a trailing `\n[truncated: N chars omitted]` marker, total length
// never above the limit.
std::string truncate_tool_output(const std::string& text, std::size_t limit);

// Runs the handler under its timeout class, truncates the result, records
// tool_call + observation events. Unknown tools and timeouts come back as
// error observations; the loop never crashes on them.
std::string dispatch_tool_call(const ToolRegistry& registry, const ToolCall& call, ToolEnv& env);

// Exponential backoff with full jitter: retry transient failures up to
// cfg.max_retry times, sleeping uniform(0, 1s * 2^attempt); permanent
// failures propagate immediately. Throws ModelExhaustedRetries.
ModelResponse call_model_with_retry(ModelClient& model, const ModelRequest& req,
                                    const LoopConfig& cfg, const SleepFn& sleep,
                                    std::mt19937_64& jitter_rng, int* attempts = nullptr);

enum class GateDecision { accept, force_verify };

// final_answer below the turn threshold must pass a verify_completion
// pre-check; at or above the threshold it is accepted directly.
GateDecision gate_final_answer(int turn_index, const LoopConfig& cfg);

struct RunOptions {
    TimeSource clock = system_clock_source();
    IdSource ids = random_id_source();
    SleepFn sleep = real_sleep();
    std::uint64_t jitter_seed = 0;  // 0: nondeterministic
    std::optional<int> pause_after_turns;  // snapshot and stop without finalizing
    Summarizer summarizer;                 // default: bound to the model client
    std::string web_corpus;
    std::shared_ptr<SandboxFactory> sandbox_factory;  // default: local backend
    // Scratch tree for terminal/tool activity; defaults to a session-derived
    // temp directory. Survives a pause, removed after finalize.
    fs::path work_dir;
};

// The Plan/Action/Observe loop: compress at turn start, call the model with
// retry, dispatch tool calls, append the turn, stream events; terminate on an
// accepted final_answer, then snapshot and finalize the workspace.
RunMeta run_task(SessionWorkspace& ws, AgentContext& ctx, SkillBank& bank, ModelClient& model,
                 AgentHome& home, const LoopConfig& cfg, const RunOptions& opts = {});

// Prompt template (versioned; override with <home>/prompt_template.md).
std::string build_system_prompt(const std::string& catalog_yaml_doc, const ojson& tools,
                                const AgentHome* home);

// Bank catalog plus the session-injected skills under submitted_skillhub/.
std::vector<CatalogEntry> session_catalog(const SkillBank& bank, const SessionWorkspace& ws);

}  // namespace autoskill
