#include "autoskill/agent_loop.hpp"

#include <algorithm>
#include <cctype>
#include <cstring>
#include <future>
#include <thread>

#include "autoskill/errors.hpp"
#include "autoskill/memory_store.hpp"
#include "autoskill/subprocess.hpp"

namespace autoskill {

SleepFn real_sleep() {
    return [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
}

std::chrono::seconds timeout_for(TimeoutClass cls, const LoopConfig& cfg) {
    switch (cls) {
        case TimeoutClass::generic: return cfg.tool_timeout;
        case TimeoutClass::terminal: return cfg.terminal_timeout;
        case TimeoutClass::exec_code: return cfg.exec_code_timeout;
        case TimeoutClass::verify: return cfg.verify_completion_timeout;
        case TimeoutClass::none: return std::chrono::seconds(24 * 3600);
    }
    return cfg.tool_timeout;
}

void ToolRegistry::add(ToolSpec spec) {
    tools_[spec.name] = std::move(spec);
}

const ToolSpec* ToolRegistry::find(const std::string& name) const {
    auto it = tools_.find(name);
    return it == tools_.end() ? nullptr : &it->second;
}

std::vector<std::string> ToolRegistry::names() const {
    std::vector<std::string> out;
    for (const auto& [name, spec] : tools_) out.push_back(name);
    return out;
}

ojson ToolRegistry::schema_json() const {
    ojson out = ojson::array();
    for (const auto& [name, spec] : tools_) {
        out.push_back(
            {{"name", name}, {"description", spec.description}, {"parameters", spec.parameters}});
    }
    return out;
}

// --- truncation ----------------------------------------------------------------

std::string truncate_tool_output(const std::string& text, std::size_t limit) {
    if (text.size() <= limit) return text;

    constexpr const char* kPrefix = "\n[truncated: ";
    constexpr const char* kSuffix = " chars omitted]";
    const std::size_t fixed = std::strlen(kPrefix) + std::strlen(kSuffix);
    if (limit <= fixed + 1) return text.substr(0, limit);

    for (std::size_t digits = 1; digits <= 20; ++digits) {
        if (limit < fixed + digits) break;
        std::size_t kept = limit - fixed - digits;
        std::size_t omitted = text.size() - kept;
        std::size_t actual_digits = std::to_string(omitted).size();
        if (actual_digits <= digits) {
            return text.substr(0, kept) + kPrefix + std::to_string(omitted) + kSuffix;
        }
    }
    return text.substr(0, limit);
}

// --- retry ----------------------------------------------------------------------

ModelResponse call_model_with_retry(ModelClient& model, const ModelRequest& req,
                                    const LoopConfig& cfg, const SleepFn& sleep,
                                    std::mt19937_64& jitter_rng, int* attempts) {
    for (int attempt = 0;; ++attempt) {
        if (attempts) *attempts = attempt + 1;
        try {
            return model.request(req);
        } catch (const ModelTransientError& e) {
            if (attempt >= cfg.max_retry)
                throw Error(ErrorCode::model_exhausted_retries,
                            std::string("gave up after ") + std::to_string(cfg.max_retry) +
                                " retries: " + e.what());
            // full jitter: uniform over [0, base * 2^attempt]
            long ceiling_ms = 1000L << attempt;
            std::uniform_int_distribution<long> dist(0, ceiling_ms);
            sleep(std::chrono::milliseconds(dist(jitter_rng)));
        }
    }
}

// --- final-answer gate ------------------------------------------------------------

GateDecision gate_final_answer(int turn_index, const LoopConfig& cfg) {
    return turn_index < cfg.verify_completion_turn_threshold ? GateDecision::force_verify
                                                             : GateDecision::accept;
}

// --- dispatch ----------------------------------------------------------------------

namespace {

ojson tool_call_payload(int turn, const ToolCall& call) {
    ojson j;
    j["turn"] = turn;
    j["name"] = call.name;
    j["args_digest"] = short_digest(call.arguments);
    j["args_chars"] = static_cast<long>(call.arguments.size());
    return j;
}

ojson observation_payload(int turn, const std::string& name, const std::string& obs) {
    ojson j;
    j["turn"] = turn;
    j["name"] = name;
    j["chars"] = static_cast<long>(obs.size());
    j["digest"] = short_digest(obs);
    std::string preview = obs.substr(0, 200);
    for (auto& c : preview)
        if (c == '\n') c = ' ';
    j["preview"] = preview;
    return j;
}

std::string format_exec_observation(const ExecResult& exec, std::chrono::seconds timeout) {
    std::string obs = "exit " + std::to_string(exec.exit_code);
    if (exec.timed_out)
        obs += " (timed out after " + std::to_string(timeout.count()) + "s)";
    obs += "\n" + exec.stdout_text;
    if (!exec.stderr_text.empty()) obs += "\n[stderr]\n" + exec.stderr_text;
    return obs;
}

}  // namespace

std::string dispatch_tool_call(const ToolRegistry& registry, const ToolCall& call, ToolEnv& env) {
    env.ws->emit(EventKind::tool_call, tool_call_payload(env.turn_index, call));

    std::string obs;
    const ToolSpec* spec = registry.find(call.name);
    if (!spec) {
        obs = "error: unknown tool " + call.name;
    } else {
        ojson args = ojson::object();
        bool args_ok = true;
        if (!call.arguments.empty()) {
            try {
                args = ojson::parse(call.arguments);
            } catch (const nlohmann::json::exception& e) {
                obs = std::string("error: malformed tool arguments: ") + e.what();
                args_ok = false;
            }
        }
        if (args_ok) {
            auto timeout = timeout_for(spec->timeout_class, *env.cfg);
            auto prom = std::make_shared<std::promise<std::string>>();
            auto fut = prom->get_future();
            ToolHandler handler = spec->handler;
            std::thread([prom, handler, args, &env]() {
                try {
                    prom->set_value(handler(args, env));
                } catch (const Error& e) {
                    prom->set_value(std::string("error: ") + e.what());
                } catch (const std::exception& e) {
                    prom->set_value(std::string("error: ") + e.what());
                }
            }).detach();
            if (fut.wait_for(timeout + env.cfg->dispatch_grace) == std::future_status::ready) {
                obs = fut.get();
            } else {
                obs = "error: tool '" + call.name + "' timed out after " +
                      std::to_string(timeout.count()) + "s";
            }
        }
    }

    obs = truncate_tool_output(obs, env.cfg->tool_text_limit);
    env.ws->emit(EventKind::observation, observation_payload(env.turn_index, call.name, obs));
    return obs;
}

// --- built-in tools --------------------------------------------------------------------

namespace {

ojson param_schema(std::initializer_list<std::pair<std::string, std::string>> fields,
                   std::initializer_list<std::string> required) {
    ojson props = ojson::object();
    for (const auto& [name, desc] : fields) props[name] = {{"type", "string"}, {"description", desc}};
    ojson j;
    j["type"] = "object";
    j["properties"] = props;
    j["required"] = required;
    return j;
}

// one verify_completion check: a single bounded model call
bool verify_completion_check(ToolEnv& env, std::string* verdict_text) {
    ModelRequest req;
    req.purpose = "verify_completion";
    req.turn_index = env.turn_index;
    req.timeout = env.cfg->verify_completion_timeout;
    req.system_prompt =
        "Check whether the task is complete. Answer with one word: complete or incomplete, "
        "optionally followed by a reason.";
    ModelResponse resp = env.model->request(req);

    ojson payload;
    payload["turn"] = env.turn_index;
    payload["purpose"] = "verify_completion";
    payload["usage"] = {{"fresh_in", resp.usage.fresh_in},
                        {"cached_in", resp.usage.cached_in},
                        {"output", resp.usage.output}};
    std::string verdict = trim(resp.text);
    std::transform(verdict.begin(), verdict.end(), verdict.begin(),
                   [](unsigned char c) { return std::tolower(c); });
    bool complete = verdict.rfind("complete", 0) == 0;
    payload["result"] = complete ? "complete" : "incomplete";
    env.ws->emit(EventKind::model_call, std::move(payload));
    if (verdict_text) *verdict_text = resp.text;
    return complete;
}

std::string handle_terminal(const ojson& args, ToolEnv& env) {
    std::string command = args.value("command", "");
    if (command.empty()) return "error: terminal requires a command";
    ExecResult exec = run_shell_command(command, env.work_dir, restricted_env(env.work_dir),
                                        std::chrono::duration_cast<std::chrono::milliseconds>(
                                            env.cfg->terminal_timeout));
    return format_exec_observation(exec, env.cfg->terminal_timeout);
}

std::string handle_read_skill(const ojson& args, ToolEnv& env) {
    std::string name = args.value("name", "");
    if (name.empty()) return "error: read_skill requires a name";

    std::string skill_md;
    std::string memory;
    fs::path injected = env.ws->submitted_skillhub_dir() / name;
    if (fs::is_directory(injected) && fs::exists(injected / "SKILL.md")) {
        skill_md = read_file(injected / "SKILL.md");
        memory = read_memory_text(injected / ".memory.md");
    } else if (env.bank->has(name)) {
        ResolvedSkill resolved = env.bank->resolve(name);
        skill_md = read_file(resolved.package.root / "SKILL.md");
        memory = resolved.memory_text;
    } else {
        return "error: unknown skill '" + name + "'";
    }

    env.current_skill = name;
    env.skill_outcomes.try_emplace(name, true);

    std::string obs = skill_md;
    obs += "\n--- skill memory ---\n";
    obs += memory.empty() ? "(empty)" : memory;
    return obs;
}

std::string handle_skill_create(const ojson& args, ToolEnv& env) {
    SkillSpec spec;
    spec.name = args.value("name", "");
    spec.purpose = args.value("purpose", "");
    spec.inputs = args.value("inputs", "");
    spec.expected_outputs = args.value("expected_outputs", "");

    PipelineOptions popts;
    popts.turn_index = env.turn_index;
    popts.test_timeout = env.cfg->exec_code_timeout;
    SessionWorkspace* ws = env.ws;
    popts.events = [ws](EventKind kind, ojson payload) { ws->emit(kind, std::move(payload)); };

    LocalSandboxFactory factory;
    PipelineOutcome outcome = run_creation_pipeline(spec, *env.model, *env.bank, factory,
                                                    env.home->staging_dir(), popts);
    if (outcome.registered) {
        std::string obs = "skill '" + outcome.name + "' registered (" +
                          std::to_string(outcome.final_eval.tests_run) + " tests";
        if (outcome.final_eval.unevaluated) obs += ", unevaluated";
        if (outcome.refine_rounds > 0)
            obs += ", fixed after " + std::to_string(outcome.refine_rounds) + " refinement round" +
                   (outcome.refine_rounds == 1 ? "" : "s");
        return obs + ")";
    }
    std::string obs = "skill '" + outcome.name + "' abandoned: tests still failing (";
    obs += std::to_string(outcome.final_eval.failures.size()) + " of " +
           std::to_string(outcome.final_eval.tests_run) + ")";
    return obs;
}

std::string handle_create_sandbox(const ojson&, ToolEnv& env) {
    auto sandbox = env.sandboxes->create();
    return "sandbox " + sandbox->id() + " created (inputs/, outputs/)";
}

std::string handle_sandbox_run(const ojson& args, ToolEnv& env) {
    auto sandbox = env.sandboxes->get(args.value("sandbox_id", ""));
    std::string command = args.value("command", "");
    if (command.empty()) return "error: sandbox_run requires a command";
    long timeout_seconds = env.cfg->exec_code_timeout.count();
    if (args.contains("timeout_seconds")) {
        const auto& t = args["timeout_seconds"];
        if (t.is_number()) timeout_seconds = t.get<long>();
        else if (t.is_string()) timeout_seconds = std::atol(t.get<std::string>().c_str());
    }
    auto timeout = std::chrono::seconds(timeout_seconds);
    ExecResult exec = sandbox->run(command, timeout);
    std::string obs = format_exec_observation(exec, timeout);
    if ((exec.exit_code != 0 || exec.timed_out) && !env.current_skill.empty()) {
        env.skill_outcomes[env.current_skill] = false;
        obs += "\nnote: execution under skill '" + env.current_skill +
               "' failed; consider recording the lesson via append_memory "
               "{\"tier\": \"skill\", \"skill\": \"" +
               env.current_skill + "\"}";
    }
    return obs;
}

std::string handle_sandbox_upload(const ojson& args, ToolEnv& env) {
    auto sandbox = env.sandboxes->get(args.value("sandbox_id", ""));
    std::string source = args.value("source", "");
    std::string dest = args.value("dest", "");
    fs::path host = contain_path(env.work_dir, source);  // host side stays in the work tree
    sandbox->upload(host, dest);
    return "uploaded " + source + " to " + (dest.empty() ? "inputs/" + host.filename().string() : dest);
}

std::string handle_sandbox_download(const ojson& args, ToolEnv& env) {
    auto sandbox = env.sandboxes->get(args.value("sandbox_id", ""));
    std::string source = args.value("source", "");
    std::string dest = args.value("dest", "");
    if (dest.empty()) dest = fs::path(source).filename().string();
    std::string bytes = sandbox->download(source);
    fs::path host = contain_path(env.work_dir, dest);
    write_file(host, bytes);
    return "downloaded " + std::to_string(bytes.size()) + " bytes to " + dest;
}

std::string handle_close_sandbox(const ojson& args, ToolEnv& env) {
    auto sandbox = env.sandboxes->get(args.value("sandbox_id", ""));
    sandbox->close();
    return "sandbox " + sandbox->id() + " closed";
}

std::string handle_web_search(const ojson& args, ToolEnv& env) {
    if (env.web_corpus.empty()) return "web_search unavailable";
    return "results for '" + args.value("query", "") + "':\n" + env.web_corpus;
}

std::string handle_append_memory(const ojson& args, ToolEnv& env) {
    std::string tier = args.value("tier", "");
    std::string content = args.value("content", "");
    if (tier == "session") {
        append_block(env.ws->memory_file(), content, env.clock);
    } else if (tier == "long_term") {
        append_block(env.home->long_term_memory_file(), content, env.clock);
    } else if (tier == "skill") {
        std::string name = args.value("skill", env.current_skill);
        if (name.empty()) return "error: append_memory tier=skill requires a skill name";
        fs::path injected = env.ws->submitted_skillhub_dir() / name;
        if (env.bank->has(name)) {
            append_block(env.bank->skill_dir(name) / ".memory.md", content, env.clock);
        } else if (fs::is_directory(injected)) {
            append_block(injected / ".memory.md", content, env.clock);
        } else {
            return "error: unknown skill '" + name + "'";
        }
    } else {
        return "error: tier must be session, long_term, or skill";
    }
    return "memory block appended (" + tier + ")";
}

std::string handle_verify_completion(const ojson&, ToolEnv& env) {
    std::string verdict;
    bool complete = verify_completion_check(env, &verdict);
    return std::string("verify_completion: ") + (complete ? "complete" : "incomplete") +
           (verdict.empty() ? "" : "\n" + verdict);
}

}  // namespace

ToolRegistry ToolRegistry::builtins() {
    ToolRegistry registry;
    registry.add({"skill_create",
                  "Create a new skill package from a specification; it is evaluated and, if its "
                  "tests pass, registered into the skill bank.",
                  param_schema({{"name", "kebab-case skill name (optional)"},
                                {"purpose", "what the skill does"},
                                {"inputs", "expected inputs"},
                                {"expected_outputs", "expected outputs"}},
                               {"purpose"}),
                  TimeoutClass::generic, handle_skill_create});
    registry.add({"web_search", "Search the web (stub backend).",
                  param_schema({{"query", "search query"}}, {"query"}), TimeoutClass::generic,
                  handle_web_search});
    registry.add({"read_skill",
                  "Load a skill's SKILL.md and its accumulated per-skill memory.",
                  param_schema({{"name", "registered or injected skill name"}}, {"name"}),
                  TimeoutClass::generic, handle_read_skill});
    registry.add({"terminal", "Run a shell command in the session workspace.",
                  param_schema({{"command", "shell command"}}, {"command"}),
                  TimeoutClass::terminal, handle_terminal});
    registry.add({"create_sandbox", "Create an isolated sandbox with inputs/ and outputs/.",
                  param_schema({}, {}), TimeoutClass::generic, handle_create_sandbox});
    registry.add({"sandbox_run", "Run a command inside a sandbox.",
                  param_schema({{"sandbox_id", "sandbox handle"},
                                {"command", "shell command"},
                                {"timeout_seconds", "override the snippet deadline"}},
                               {"sandbox_id", "command"}),
                  TimeoutClass::exec_code, handle_sandbox_run});
    registry.add({"sandbox_upload", "Copy a workspace file into a sandbox (defaults under inputs/).",
                  param_schema({{"sandbox_id", "sandbox handle"},
                                {"source", "path relative to the session workspace"},
                                {"dest", "path relative to the sandbox root"}},
                               {"sandbox_id", "source"}),
                  TimeoutClass::generic, handle_sandbox_upload});
    registry.add({"sandbox_download", "Copy a sandbox file back into the workspace.",
                  param_schema({{"sandbox_id", "sandbox handle"},
                                {"source", "path relative to the sandbox root"},
                                {"dest", "path relative to the session workspace"}},
                               {"sandbox_id", "source"}),
                  TimeoutClass::generic, handle_sandbox_download});
    registry.add({"close_sandbox", "Destroy a sandbox.",
                  param_schema({{"sandbox_id", "sandbox handle"}}, {"sandbox_id"}),
                  TimeoutClass::generic, handle_close_sandbox});
    registry.add({"verify_completion", "Check whether the task is actually complete.",
                  param_schema({}, {}), TimeoutClass::verify, handle_verify_completion});
    registry.add({"final_answer", "Finish the task with a final message.",
                  param_schema({{"message", "final answer text"},
                                {"outputs", "workspace-relative output files (array)"}},
                               {"message"}),
                  TimeoutClass::none,
                  [](const ojson&, ToolEnv&) -> std::string {
                      return "final_answer is handled by the loop";
                  }});
    registry.add({"append_memory",
                  "Append a note to session, long-term, or per-skill memory.",
                  param_schema({{"tier", "session | long_term | skill"},
                                {"content", "the note"},
                                {"skill", "skill name when tier=skill"}},
                               {"tier", "content"}),
                  TimeoutClass::generic, handle_append_memory});
    return registry;
}

// --- prompt ------------------------------------------------------------------------------

namespace {

constexpr const char* kPromptTemplateVersion = "autoskill-prompt/1";
constexpr const char* kPromptTemplate =
    "You are an autonomous task-solving agent. Work in turns: plan, act through tools, observe "
    "the results, and adapt. Prefer an existing skill from the catalog over re-deriving a "
    "procedure; read it with read_skill before use. Create a new skill with skill_create when "
    "none fits and the procedure is reusable. Record durable lessons with append_memory. Finish "
    "with final_answer.\n"
    "\n"
    "## Skill catalog\n"
    "{{catalog}}\n"
    "\n"
    "## Tools\n"
    "{{tools}}\n";

std::string replace_all(std::string text, const std::string& needle, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(needle, pos)) != std::string::npos) {
        text.replace(pos, needle.size(), value);
        pos += value.size();
    }
    return text;
}

}  // namespace

std::string build_system_prompt(const std::string& catalog_yaml_doc, const ojson& tools,
                                const AgentHome* home) {
    std::string tpl = kPromptTemplate;
    if (home) {
        fs::path override_file = home->root() / "prompt_template.md";
        if (fs::exists(override_file)) tpl = read_file(override_file);
    }
    tpl = replace_all(std::move(tpl), "{{catalog}}",
                      catalog_yaml_doc.empty() ? "(no skills registered)" : catalog_yaml_doc);
    tpl = replace_all(std::move(tpl), "{{tools}}", tools.dump());
    return std::string(kPromptTemplateVersion) + "\n" + tpl;
}

std::vector<CatalogEntry> session_catalog(const SkillBank& bank, const SessionWorkspace& ws) {
    std::map<std::string, std::string> merged;
    for (const auto& entry : bank.catalog()) merged[entry.name] = entry.description;
    if (fs::is_directory(ws.submitted_skillhub_dir())) {
        for (const auto& dir : fs::directory_iterator(ws.submitted_skillhub_dir())) {
            if (!dir.is_directory()) continue;
            if (!validate_package(dir.path()).ok()) continue;
            SkillPackage pkg = parse_package(dir.path());
            merged[pkg.name()] = pkg.frontmatter.description;  // session-local view
        }
    }
    std::vector<CatalogEntry> out;
    for (const auto& [name, description] : merged) out.push_back({name, description});
    return out;
}

// --- the loop ---------------------------------------------------------------------------

namespace {

ojson serialize_chain(const AgentContext& ctx) {
    ojson messages = ojson::array();
    for (const ConversationNode* node : ctx.active_chain()) {
        ojson m = node->effective_input().to_json();
        m["is_summary"] = node->is_summary;
        messages.push_back(std::move(m));
    }
    return messages;
}

double seconds_between(std::chrono::system_clock::time_point a,
                       std::chrono::system_clock::time_point b) {
    return std::chrono::duration<double>(b - a).count();
}

}  // namespace

RunMeta run_task(SessionWorkspace& ws, AgentContext& ctx, SkillBank& bank, ModelClient& model,
                 AgentHome& home, const LoopConfig& cfg, const RunOptions& opts) {
    auto run_start = opts.clock();

    std::shared_ptr<SandboxFactory> factory = opts.sandbox_factory;
    if (!factory) {
        factory = std::make_shared<LocalSandboxFactory>(
            fs::temp_directory_path() / ("autoskill-sbx-" + ws.session_id()), opts.ids);
    }
    SandboxManager sandboxes(factory);

    ToolRegistry registry = ToolRegistry::builtins();
    ToolEnv env;
    env.ws = &ws;
    env.bank = &bank;
    env.sandboxes = &sandboxes;
    env.model = &model;
    env.cfg = &cfg;
    env.home = &home;
    env.clock = opts.clock;
    env.web_corpus = opts.web_corpus;
    env.work_dir = opts.work_dir.empty()
                       ? fs::temp_directory_path() / ("autoskill-work-" + ws.session_id())
                       : opts.work_dir;
    fs::create_directories(env.work_dir);
    // caller-supplied inputs are surfaced in the agent's working tree
    if (fs::is_directory(ws.submitted_inputs_dir())) {
        for (const auto& entry : fs::directory_iterator(ws.submitted_inputs_dir())) {
            if (entry.is_regular_file())
                fs::copy_file(entry.path(), env.work_dir / entry.path().filename(),
                              fs::copy_options::overwrite_existing);
        }
    }

    std::mt19937_64 jitter(opts.jitter_seed ? opts.jitter_seed
                                            : std::random_device{}());

    Summarizer summarizer = opts.summarizer;
    if (!summarizer) {
        // production summarizer: one model call over the span
        summarizer = [&env, &cfg, &opts, &jitter](const std::vector<TurnPayload>& span) {
            ModelRequest req;
            req.purpose = "summarize";
            req.turn_index = env.turn_index;
            req.timeout = cfg.model_timeout;
            req.system_prompt =
                "Summarize the following turns compactly; keep file names, commands, and results.";
            for (const auto& payload : span) req.messages.push_back(payload.to_json());
            int attempts = 0;
            ModelResponse resp =
                call_model_with_retry(*env.model, req, cfg, opts.sleep, jitter, &attempts);
            env.ws->emit(EventKind::model_call,
                         {{"turn", env.turn_index},
                          {"purpose", "summarize"},
                          {"usage",
                           {{"fresh_in", resp.usage.fresh_in},
                            {"cached_in", resp.usage.cached_in},
                            {"output", resp.usage.output}}},
                          {"attempts", attempts}});
            return resp.text;
        };
    }

    std::string catalog_doc = catalog_yaml(session_catalog(bank, ws));
    std::string system_prompt = build_system_prompt(catalog_doc, registry.schema_json(), &home);

    RunMeta meta;
    meta.model = model.model_id();
    meta.started_at = format_iso8601(run_start);

    auto exec_start = opts.clock();
    Profile profile;
    profile.setup_seconds = seconds_between(run_start, exec_start);

    int turn = static_cast<int>(ctx.turn_count());
    bool finished = false;

    try {
        while (!finished) {
            ++turn;
            if (turn > cfg.max_turns)
                throw Error(ErrorCode::loop_aborted,
                            "turn limit " + std::to_string(cfg.max_turns) + " reached");
            env.turn_index = turn;

            // compression runs at turn start, before the model call
            CompressionReport report = ctx.maybe_compress_history(summarizer);
            if (report.outcome != CompressionOutcome::untouched) {
                ojson payload;
                payload["turn"] = turn;
                payload["outcome"] = to_string(report.outcome);
                payload["tokens_before"] = static_cast<long>(report.tokens_before);
                payload["tokens_after"] = static_cast<long>(report.tokens_after);
                payload["nodes_compressed"] = static_cast<long>(report.nodes_compressed.size());
                ws.emit(EventKind::compression, std::move(payload));
            }

            ModelRequest req;
            req.system_prompt = system_prompt;
            req.messages = serialize_chain(ctx);
            req.tools = registry.schema_json();
            req.turn_index = turn;
            req.purpose = "turn";
            req.timeout = cfg.model_timeout;

            int attempts = 0;
            ModelResponse resp =
                call_model_with_retry(model, req, cfg, opts.sleep, jitter, &attempts);
            ws.emit(EventKind::model_call, {{"turn", turn},
                                            {"purpose", "turn"},
                                            {"usage",
                                             {{"fresh_in", resp.usage.fresh_in},
                                              {"cached_in", resp.usage.cached_in},
                                              {"output", resp.usage.output}}},
                                            {"attempts", attempts}});
            ws.emit(EventKind::plan, {{"turn", turn}, {"text", resp.text}});

            TurnPayload payload;
            payload.text = resp.text;
            payload.tool_calls = resp.tool_calls;
            payload.usage = resp.usage;

            for (const ToolCall& call : resp.tool_calls) {
                if (call.name == "final_answer") {
                    ws.emit(EventKind::tool_call, tool_call_payload(turn, call));
                    ojson args = ojson::object();
                    try {
                        if (!call.arguments.empty()) args = ojson::parse(call.arguments);
                    } catch (const nlohmann::json::exception&) {
                    }

                    bool accepted = true;
                    if (gate_final_answer(turn, cfg) == GateDecision::force_verify)
                        accepted = verify_completion_check(env, nullptr);

                    if (!accepted) {
                        std::string obs =
                            "final_answer rejected: verify_completion reported incomplete";
                        ws.emit(EventKind::observation,
                                observation_payload(turn, "final_answer", obs));
                        payload.observations.push_back(obs);
                        continue;
                    }

                    env.final_message = args.value("message", "");
                    for (const auto& rel : args.value("outputs", ojson::array())) {
                        try {
                            env.final_outputs.push_back(
                                contain_path(ws.root(), rel.get<std::string>()));
                        } catch (const Error&) {
                            // escaped path in the final answer: dropped
                        }
                    }
                    ws.emit(EventKind::final_answer, {{"turn", turn}});
                    payload.observations.push_back("final answer accepted");
                    finished = true;
                    break;
                }
                payload.observations.push_back(dispatch_tool_call(registry, call, env));
            }

            ctx.append_turn(std::move(payload));

            if (!finished && opts.pause_after_turns && turn >= *opts.pause_after_turns) {
                sandboxes.close_all();
                ws.persist_snapshot(ctx);
                meta.turn_count = static_cast<int>(ctx.turn_count());
                meta.finished_at = format_iso8601(opts.clock());
                return meta;  // paused; workspace stays open for resume
            }
        }
    } catch (...) {
        sandboxes.close_all();
        throw;
    }

    sandboxes.close_all();
    for (const auto& [name, ok] : env.skill_outcomes) {
        if (bank.has(name)) bank.record_usage(name, ws.session_id(), ok);
    }
    bank.note_session_end(ws.session_id());
    ws.persist_snapshot(ctx);

    auto exec_end = opts.clock();
    profile.exec_seconds = seconds_between(exec_start, exec_end);

    meta.turn_count = static_cast<int>(ctx.turn_count());
    meta.finished_at = format_iso8601(exec_end);
    meta.success = true;
    ws.finalize(env.final_message.value_or(""), env.final_outputs, meta, profile);
    std::error_code ec;
    fs::remove_all(env.work_dir, ec);
    return meta;
}

}  // namespace autoskill
