#pragma once

#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "autoskill/context_dag.hpp"
#include "autoskill/home.hpp"
#include "autoskill/util.hpp"

namespace autoskill {

enum class EventKind { plan, tool_call, observation, model_call, compression, final_answer };
const char* to_string(EventKind kind);
std::optional<EventKind> event_kind_from_string(const std::string& text);

struct EventRecord {
    long seq = 0;
    std::string ts;
    EventKind kind = EventKind::plan;
    ojson payload;

    ojson to_json() const;
    static EventRecord from_json(const ojson& j);
};

struct RunMeta {
    std::optional<double> reward;  // [0, 1], set by an external verifier
    int turn_count = 0;
    std::string model;
    std::string started_at;
    std::string finished_at;
    std::optional<bool> success;  // final_answer accepted

    ojson to_json() const;
    static RunMeta from_json(const ojson& j);
};

struct Profile {
    double setup_seconds = 0.0;
    double exec_seconds = 0.0;
};

// A per-session workspace directory under <home>/sessions/<session_id>/.
// One writer (the owning loop); any file may be read concurrently.
class SessionWorkspace {
public:
    static constexpr int kSchemaVersion = 1;

    // Scaffolds the directory, writes the instruction, copies inputs and
    // injected skill packages. Throws HomeNotInitialized.
    static SessionWorkspace create(const AgentHome& home, const std::string& instruction,
                                   const std::vector<fs::path>& input_files = {},
                                   const std::vector<fs::path>& injected_skill_dirs = {},
                                   IdSource ids = random_id_source(),
                                   TimeSource clock = system_clock_source());

    // Opens an existing workspace for inspection or resume.
    static SessionWorkspace open(const AgentHome& home, const std::string& session_id,
                                 TimeSource clock = system_clock_source());

    const std::string& session_id() const { return session_id_; }
    const fs::path& root() const { return root_; }

    fs::path instruction_file() const { return root_ / "instruction.md"; }
    fs::path submitted_inputs_dir() const { return root_ / "submitted_inputs"; }
    fs::path submitted_skillhub_dir() const { return root_ / "submitted_skillhub"; }
    fs::path result_output_dir() const { return root_ / "result_output_files"; }
    fs::path agent_message_file() const { return root_ / "agent_message.md"; }
    fs::path agent_stdout_file() const { return root_ / "agent.stdout.txt"; }
    fs::path events_file() const { return root_ / "events.jsonl"; }
    fs::path memory_file() const { return root_ / "memory.md"; }
    fs::path ctx_state_file() const { return root_ / "ctx_state.json"; }
    fs::path profile_file() const { return root_ / "profile.json"; }
    fs::path run_meta_file() const { return root_ / "run_meta.json"; }

    // Appends one line to events.jsonl, flushed before return. The record's
    // seq must be exactly last + 1 (SequenceGap otherwise). A readable mirror
    // line goes to agent.stdout.txt.
    void append_event(const EventRecord& record);

    // Builds-and-appends with the next sequence number.
    EventRecord emit(EventKind kind, ojson payload);

    long last_seq() const { return last_seq_; }
    std::vector<EventRecord> read_events() const;

    // Atomic snapshot of the conversation DAG (temp file + rename).
    void persist_snapshot(const AgentContext& ctx) const;

    // Loads the snapshot. Throws SnapshotMissing / SnapshotCorrupt.
    AgentContext load_snapshot(CompressionBudget budget = {},
                               IdSource ids = random_id_source()) const;

    // Writes final message, output copies, run_meta.json, profile.json and
    // makes sure memory.md exists. Refuses a second call (AlreadyFinalized).
    void finalize(const std::string& final_message, const std::vector<fs::path>& output_files,
                  const RunMeta& meta, const Profile& profile);

    bool finalized() const { return fs::exists(run_meta_file()); }

    const TimeSource& clock() const { return clock_; }

private:
    SessionWorkspace(fs::path root, std::string session_id, TimeSource clock);
    void append_event_unlocked(const EventRecord& record);

    fs::path root_;
    std::string session_id_;
    TimeSource clock_;
    long last_seq_ = 0;
    // serializes event appends (skill pipelines may emit from worker threads)
    std::shared_ptr<std::mutex> event_mu_ = std::make_shared<std::mutex>();
};

// (workspace, restored context) for cross-session resume. Throws
// SnapshotMissing / SnapshotCorrupt.
std::pair<SessionWorkspace, AgentContext> resume_session(const AgentHome& home,
                                                         const std::string& session_id,
                                                         CompressionBudget budget = {},
                                                         IdSource ids = random_id_source(),
                                                         TimeSource clock = system_clock_source());

}  // namespace autoskill
