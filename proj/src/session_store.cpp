#include "autoskill/session_store.hpp"

#include <fstream>

#include "autoskill/errors.hpp"

namespace autoskill {

const char* to_string(EventKind kind) {
    switch (kind) {
        case EventKind::plan: return "plan";
        case EventKind::tool_call: return "tool_call";
        case EventKind::observation: return "observation";
        case EventKind::model_call: return "model_call";
        case EventKind::compression: return "compression";
        case EventKind::final_answer: return "final_answer";
    }
    return "unknown";
}

std::optional<EventKind> event_kind_from_string(const std::string& text) {
    for (EventKind kind : {EventKind::plan, EventKind::tool_call, EventKind::observation,
                           EventKind::model_call, EventKind::compression, EventKind::final_answer}) {
        if (text == to_string(kind)) return kind;
    }
    return std::nullopt;
}

ojson EventRecord::to_json() const {
    ojson j;
    j["seq"] = seq;
    j["ts"] = ts;
    j["kind"] = to_string(kind);
    j["payload"] = payload;
    return j;
}

EventRecord EventRecord::from_json(const ojson& j) {
    EventRecord r;
    r.seq = j.value("seq", 0L);
    r.ts = j.value("ts", "");
    auto kind = event_kind_from_string(j.value("kind", ""));
    if (!kind) throw Error(ErrorCode::io_failure, "unknown event kind in stream");
    r.kind = *kind;
    r.payload = j.value("payload", ojson::object());
    return r;
}

ojson RunMeta::to_json() const {
    ojson j;
    j["reward"] = reward ? ojson(*reward) : ojson(nullptr);
    j["turn_count"] = turn_count;
    j["model"] = model;
    j["started_at"] = started_at;
    j["finished_at"] = finished_at;
    j["success"] = success ? ojson(*success) : ojson(nullptr);
    return j;
}

RunMeta RunMeta::from_json(const ojson& j) {
    RunMeta m;
    if (j.contains("reward") && !j["reward"].is_null()) m.reward = j["reward"].get<double>();
    m.turn_count = j.value("turn_count", 0);
    m.model = j.value("model", "");
    m.started_at = j.value("started_at", "");
    m.finished_at = j.value("finished_at", "");
    if (j.contains("success") && !j["success"].is_null()) m.success = j["success"].get<bool>();
    return m;
}

SessionWorkspace::SessionWorkspace(fs::path root, std::string session_id, TimeSource clock)
    : root_(std::move(root)), session_id_(std::move(session_id)), clock_(std::move(clock)) {}

SessionWorkspace SessionWorkspace::create(const AgentHome& home, const std::string& instruction,
                                          const std::vector<fs::path>& input_files,
                                          const std::vector<fs::path>& injected_skill_dirs,
                                          IdSource ids, TimeSource clock) {
    if (!home.initialized())
        throw Error(ErrorCode::home_not_initialized,
                    "agent home " + home.root().string() + " is not initialized (run init)");

    std::string session_id = ids();
    fs::path root = home.sessions_dir() / session_id;
    SessionWorkspace ws(root, session_id, std::move(clock));

    fs::create_directories(root);
    fs::create_directories(ws.submitted_inputs_dir());
    fs::create_directories(ws.submitted_skillhub_dir());
    fs::create_directories(ws.result_output_dir());
    write_file(ws.instruction_file(), instruction);

    for (const auto& input : input_files) {
        if (!fs::is_regular_file(input))
            throw Error(ErrorCode::io_failure, "input file missing: " + input.string());
        fs::copy_file(input, ws.submitted_inputs_dir() / input.filename());
    }
    for (const auto& dir : injected_skill_dirs) {
        if (!fs::is_directory(dir))
            throw Error(ErrorCode::io_failure, "injected skill missing: " + dir.string());
        copy_tree(dir, ws.submitted_skillhub_dir() / dir.filename());
    }
    return ws;
}

SessionWorkspace SessionWorkspace::open(const AgentHome& home, const std::string& session_id,
                                        TimeSource clock) {
    fs::path root = home.sessions_dir() / session_id;
    if (!fs::is_directory(root))
        throw Error(ErrorCode::not_found, "no session " + session_id);
    SessionWorkspace ws(root, session_id, std::move(clock));
    for (const auto& record : ws.read_events()) ws.last_seq_ = record.seq;
    return ws;
}

namespace {

std::string stdout_mirror_line(const EventRecord& r) {
    std::string line = "[" + std::to_string(r.seq) + "] " + std::string(to_string(r.kind));
    switch (r.kind) {
        case EventKind::model_call:
            line += " purpose=" + r.payload.value("purpose", std::string("turn"));
            if (r.payload.contains("usage")) {
                const auto& u = r.payload["usage"];
                line += " tokens fresh_in=" + std::to_string(u.value("fresh_in", 0L)) +
                        " cached_in=" + std::to_string(u.value("cached_in", 0L)) +
                        " output=" + std::to_string(u.value("output", 0L));
            }
            break;
        case EventKind::tool_call:
            line += " " + r.payload.value("name", std::string());
            break;
        case EventKind::observation:
            line += " " + r.payload.value("name", std::string()) + " (" +
                    std::to_string(r.payload.value("chars", 0L)) + " chars)";
            break;
        case EventKind::plan: {
            std::string text = r.payload.value("text", std::string());
            if (text.size() > 120) text = text.substr(0, 120) + "...";
            for (auto& c : text)
                if (c == '\n') c = ' ';
            line += " " + text;
            break;
        }
        case EventKind::compression:
            line += " " + r.payload.value("outcome", std::string()) + " tokens " +
                    std::to_string(r.payload.value("tokens_before", 0L)) + "->" +
                    std::to_string(r.payload.value("tokens_after", 0L));
            break;
        case EventKind::final_answer:
            break;
    }
    return line + "\n";
}

}  // namespace

void SessionWorkspace::append_event_unlocked(const EventRecord& record) {
    if (record.seq != last_seq_ + 1)
        throw Error(ErrorCode::sequence_gap,
                    "event seq " + std::to_string(record.seq) + " after " +
                        std::to_string(last_seq_));
    append_file_locked(events_file(), record.to_json().dump() + "\n");
    append_file_locked(agent_stdout_file(), stdout_mirror_line(record));
    last_seq_ = record.seq;
}

void SessionWorkspace::append_event(const EventRecord& record) {
    std::lock_guard<std::mutex> lock(*event_mu_);
    append_event_unlocked(record);
}

EventRecord SessionWorkspace::emit(EventKind kind, ojson payload) {
    std::lock_guard<std::mutex> lock(*event_mu_);
    EventRecord record;
    record.seq = last_seq_ + 1;
    record.ts = format_iso8601(clock_());
    record.kind = kind;
    record.payload = std::move(payload);
    append_event_unlocked(record);
    return record;
}

std::vector<EventRecord> SessionWorkspace::read_events() const {
    std::vector<EventRecord> out;
    if (!fs::exists(events_file())) return out;
    std::ifstream in(events_file());
    std::string line;
    while (std::getline(in, line)) {
        if (trim(line).empty()) continue;
        out.push_back(EventRecord::from_json(ojson::parse(line)));
    }
    return out;
}

void SessionWorkspace::persist_snapshot(const AgentContext& ctx) const {
    ojson j;
    j["version"] = kSchemaVersion;
    ojson state = ctx.to_json();
    j["root"] = state["root"];
    j["tip"] = state["tip"];
    j["nodes"] = state["nodes"];
    atomic_write_file(ctx_state_file(), j.dump(2) + "\n");
}

AgentContext SessionWorkspace::load_snapshot(CompressionBudget budget, IdSource ids) const {
    if (!fs::exists(ctx_state_file()))
        throw Error(ErrorCode::snapshot_missing, "no ctx_state.json for session " + session_id_);
    ojson j;
    try {
        j = ojson::parse(read_file(ctx_state_file()));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::snapshot_corrupt, e.what());
    }
    if (j.value("version", 0) != kSchemaVersion)
        throw Error(ErrorCode::snapshot_corrupt, "unsupported ctx_state.json version");
    return AgentContext::from_json(j, budget, std::move(ids));
}

void SessionWorkspace::finalize(const std::string& final_message,
                                const std::vector<fs::path>& output_files, const RunMeta& meta,
                                const Profile& profile) {
    if (finalized())
        throw Error(ErrorCode::already_finalized, "session " + session_id_ + " already finalized");

    write_file(agent_message_file(), final_message);
    fs::create_directories(result_output_dir());
    for (const auto& file : output_files) {
        if (!fs::is_regular_file(file))
            throw Error(ErrorCode::io_failure, "output file missing: " + file.string());
        fs::copy_file(file, result_output_dir() / file.filename(),
                      fs::copy_options::overwrite_existing);
    }
    // session memory is created lazily; guarantee its presence in the final
    // workspace layout
    if (!fs::exists(memory_file())) write_file(memory_file(), "");
    if (!fs::exists(agent_stdout_file())) write_file(agent_stdout_file(), "");
    if (!fs::exists(events_file())) write_file(events_file(), "");

    ojson prof;
    prof["setup_seconds"] = profile.setup_seconds;
    prof["exec_seconds"] = profile.exec_seconds;
    atomic_write_file(profile_file(), prof.dump(2) + "\n");
    atomic_write_file(run_meta_file(), meta.to_json().dump(2) + "\n");
}

std::pair<SessionWorkspace, AgentContext> resume_session(const AgentHome& home,
                                                         const std::string& session_id,
                                                         CompressionBudget budget, IdSource ids,
                                                         TimeSource clock) {
    fs::path root = home.sessions_dir() / session_id;
    if (!fs::is_directory(root) || !fs::exists(root / "ctx_state.json"))
        throw Error(ErrorCode::snapshot_missing, "no snapshot for session " + session_id);
    SessionWorkspace ws = SessionWorkspace::open(home, session_id, std::move(clock));
    AgentContext ctx = ws.load_snapshot(budget, std::move(ids));
    return {std::move(ws), std::move(ctx)};
}

}  // namespace autoskill
