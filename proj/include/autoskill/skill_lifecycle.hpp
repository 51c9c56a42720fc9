#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "autoskill/home.hpp"
#include "autoskill/model_client.hpp"
#include "autoskill/sandbox.hpp"
#include "autoskill/session_store.hpp"
#include "autoskill/skill_bank.hpp"
#include "autoskill/skill_package.hpp"

namespace autoskill {

// High-level description the agent hands to the creation pipeline. `name`
// pins the package directory; when empty the name is taken from the
// generated frontmatter.
struct SkillSpec {
    std::string name;
    std::string purpose;
    std::string inputs;
    std::string expected_outputs;
};

// Replayed view of a finished session, the distillation source.
struct Trajectory {
    std::string session_id;
    std::vector<TurnPayload> full_history;  // replay order
    std::vector<TurnPayload> active_view;   // what the model last saw (post-compression)
    RunMeta meta;
};

Trajectory load_trajectory(const AgentHome& home, const std::string& session_id);

// Receives pipeline events; the agent loop binds this to the session event
// stream, the CLI to a log sink. Payloads carry a "stage" field
// (create / evaluate / refine / register / abandon).
using PipelineEventSink = std::function<void(EventKind kind, ojson payload)>;

struct PipelineOptions {
    int max_refine_rounds = 3;
    std::chrono::seconds test_timeout{constants::kExecCodeTimeoutSeconds};
    PipelineEventSink events;  // optional
    // Turn the pipeline runs under when invoked from the agent loop; keeps
    // scripted model clients (keyed by turn) deterministic.
    int turn_index = 1;
};

// Three model-driven steps: generate SKILL.md, plan the subdirectory
// structure, generate the planned files. One automatic re-ask per malformed
// step, then GenerationInvalid. The staged package passes validate_package.
SkillPackage create_skill(const SkillSpec& spec, ModelClient& model, const fs::path& staging,
                          const PipelineOptions& opts = {});

// Uploads the package into a fresh sandbox and executes every file under
// tests/ as a program; exit 0 = pass. No tests/ -> tests_run 0, vacuously
// passed, flagged unevaluated.
EvaluationResult evaluate_skill(const SkillPackage& pkg, SandboxFactory& sandboxes,
                                const PipelineOptions& opts = {});

// Feeds failure traces to the model, applies full-file replacement patches,
// re-validates and re-evaluates, up to max_refine_rounds. Patches outside
// the package root are rejected and count as a failed round.
std::pair<SkillPackage, EvaluationResult> refine_skill(SkillPackage pkg, EvaluationResult eval,
                                                       ModelClient& model,
                                                       SandboxFactory& sandboxes,
                                                       const PipelineOptions& opts = {},
                                                       int* rounds_used = nullptr);

// Serializes the trajectory, asks the model for a SkillSpec, then runs
// create_skill and appends a provenance section naming the source session.
// Requires a successful source (reward > 0 or success flag).
SkillPackage distill_skill_from_trajectory(const Trajectory& traj, ModelClient& model,
                                           const fs::path& staging,
                                           const PipelineOptions& opts = {},
                                           bool use_full_history = false);

struct PipelineOutcome {
    bool registered = false;
    std::string name;
    EvaluationResult final_eval;
    int refine_rounds = 0;
    fs::path staged_root;
};

// create (or adopt a staged package) -> evaluate -> refine* -> register|abandon.
// A failed pipeline leaves the bank untouched; staging holds the remains.
PipelineOutcome run_creation_pipeline(const SkillSpec& spec, ModelClient& model, SkillBank& bank,
                                      SandboxFactory& sandboxes, const fs::path& staging,
                                      const PipelineOptions& opts = {});

// Serialized trajectory text handed to the distillation model call.
std::string serialize_trajectory(const Trajectory& traj, bool use_full_history);

}  // namespace autoskill
