// autoskill — batch CLI over the skill-lifecycle runtime.
// Machine-readable output goes to stdout, diagnostics to stderr.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <CLI11.hpp>

#include <algorithm>
#include <iostream>
#include <memory>
#include <optional>

#include "autoskill/agent_loop.hpp"
#include "autoskill/errors.hpp"
#include "autoskill/home.hpp"
#include "autoskill/memory_store.hpp"
#include "autoskill/model_client.hpp"
#include "autoskill/session_store.hpp"
#include "autoskill/skill_bank.hpp"
#include "autoskill/skill_lifecycle.hpp"
#include "autoskill/skill_package.hpp"

namespace {

using namespace autoskill;

struct GlobalOpts {
    std::string home_flag;
    std::string model_flag;
    bool plain = false;

    AgentHome home() const {
        return resolve_home(home_flag.empty() ? std::nullopt
                                              : std::optional<fs::path>(home_flag));
    }
};

std::unique_ptr<ModelClient> make_model(const GlobalOpts& opts, const RuntimeConfig& cfg) {
    if (opts.model_flag.rfind("scripted:", 0) == 0) {
        std::string fixture = opts.model_flag.substr(9);
        return std::make_unique<ScriptedModelClient>(ScriptedModelClient::from_file(fixture));
    }
    if (opts.model_flag == "remote") {
        return std::make_unique<RemoteModelClient>(cfg.endpoint, cfg.model_id, cfg.api_key,
                                                   cfg.loop.model_timeout);
    }
    throw Error(ErrorCode::usage_error,
                "--model must be scripted:<fixture.json> or remote (got '" + opts.model_flag +
                    "')");
}

void print_json(const ojson& j, bool plain) {
    if (plain) {
        // a single value per line; nested values stay JSON
        for (const auto& [key, value] : j.items())
            std::cout << key << ": " << (value.is_string() ? value.get<std::string>() : value.dump())
                      << "\n";
    } else {
        std::cout << j.dump(2) << "\n";
    }
}

int cmd_init(const GlobalOpts& opts) {
    AgentHome home = opts.home();
    home.init();
    ojson out;
    out["home"] = home.root().string();
    out["skills"] = home.skills_dir().string();
    out["sessions"] = home.sessions_dir().string();
    out["long_term_memory"] = home.long_term_memory_file().string();
    print_json(out, opts.plain);
    return 0;
}

int cmd_skill_validate(const GlobalOpts& opts, const std::string& dir) {
    ValidationReport report = validate_package(dir);
    print_json(report.to_json(), opts.plain);
    return report.ok() ? 0 : 1;
}

int cmd_skill_evaluate(const GlobalOpts& opts, const std::string& dir) {
    AgentHome home = opts.home();
    RuntimeConfig cfg = load_runtime_config(home);
    SkillPackage pkg = parse_package(dir);
    LocalSandboxFactory factory;
    PipelineOptions popts;
    popts.test_timeout = cfg.loop.exec_code_timeout;
    EvaluationResult result = evaluate_skill(pkg, factory, popts);
    print_json(result.to_json(), opts.plain);
    return result.all_passed() ? 0 : 1;
}

int cmd_skill_register(const GlobalOpts& opts, const std::string& dir) {
    AgentHome home = opts.home();
    RuntimeConfig cfg = load_runtime_config(home);
    SkillBank bank = SkillBank::open(home.skills_dir());
    SkillPackage pkg = parse_package(dir);
    LocalSandboxFactory factory;
    PipelineOptions popts;
    popts.test_timeout = cfg.loop.exec_code_timeout;
    EvaluationResult result = evaluate_skill(pkg, factory, popts);
    RegistrationOutcome outcome = bank.register_skill(pkg, result);
    ojson out;
    out["registered"] = true;
    out["name"] = outcome.name;
    out["tests_run"] = result.tests_run;
    out["unevaluated"] = outcome.unevaluated_warning;
    if (outcome.unevaluated_warning)
        std::cerr << "warning: skill ships no tests; registered unevaluated\n";
    print_json(out, opts.plain);
    return 0;
}

ojson outcome_json(const PipelineOutcome& outcome) {
    ojson out;
    out["registered"] = outcome.registered;
    out["name"] = outcome.name;
    out["staged_root"] = outcome.staged_root.string();
    out["refine_rounds"] = outcome.refine_rounds;
    out["evaluation"] = outcome.final_eval.to_json();
    return out;
}

int cmd_skill_create(const GlobalOpts& opts, const std::string& spec_file) {
    AgentHome home = opts.home();
    RuntimeConfig cfg = load_runtime_config(home);
    auto model = make_model(opts, cfg);

    ojson spec_json = ojson::parse(read_file(spec_file));
    SkillSpec spec;
    spec.name = spec_json.value("name", "");
    spec.purpose = spec_json.value("purpose", "");
    spec.inputs = spec_json.value("inputs", "");
    spec.expected_outputs = spec_json.value("expected_outputs", "");

    SkillBank bank = SkillBank::open(home.skills_dir());
    LocalSandboxFactory factory;
    PipelineOptions popts;
    popts.test_timeout = cfg.loop.exec_code_timeout;
    PipelineOutcome outcome =
        run_creation_pipeline(spec, *model, bank, factory, home.staging_dir(), popts);
    print_json(outcome_json(outcome), opts.plain);
    return outcome.registered ? 0 : 1;
}

int cmd_skill_distill(const GlobalOpts& opts, const std::string& session_id) {
    AgentHome home = opts.home();
    RuntimeConfig cfg = load_runtime_config(home);
    auto model = make_model(opts, cfg);

    Trajectory traj = load_trajectory(home, session_id);
    PipelineOptions popts;
    popts.test_timeout = cfg.loop.exec_code_timeout;
    SkillPackage pkg = distill_skill_from_trajectory(traj, *model, home.staging_dir(), popts);

    SkillBank bank = SkillBank::open(home.skills_dir());
    LocalSandboxFactory factory;
    EvaluationResult eval = evaluate_skill(pkg, factory, popts);
    PipelineOutcome outcome;
    outcome.name = pkg.name();
    outcome.staged_root = pkg.root;
    if (!eval.all_passed()) {
        try {
            std::tie(pkg, eval) =
                refine_skill(pkg, eval, *model, factory, popts, &outcome.refine_rounds);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::refinement_exhausted) throw;
            outcome.final_eval = eval;
            print_json(outcome_json(outcome), opts.plain);
            return 1;
        }
    }
    bank.register_skill(pkg, eval);
    outcome.registered = true;
    outcome.final_eval = eval;
    print_json(outcome_json(outcome), opts.plain);
    return 0;
}

int cmd_catalog(const GlobalOpts& opts) {
    AgentHome home = opts.home();
    SkillBank bank = SkillBank::open(home.skills_dir());
    auto entries = bank.catalog();
    if (opts.plain) {
        for (const auto& e : entries) std::cout << e.name << "\t" << e.description << "\n";
    } else {
        std::cout << catalog_yaml(entries);  // byte-identical to the injected document
    }
    return 0;
}

int cmd_session_run(const GlobalOpts& opts, const std::string& instruction_file,
                    const std::string& inputs_dir, const std::string& skills_dir) {
    AgentHome home = opts.home();
    RuntimeConfig cfg = load_runtime_config(home);
    auto model = make_model(opts, cfg);

    std::vector<fs::path> inputs;
    if (!inputs_dir.empty()) {
        for (const auto& entry : fs::directory_iterator(inputs_dir))
            if (entry.is_regular_file()) inputs.push_back(entry.path());
        std::sort(inputs.begin(), inputs.end());
    }
    std::vector<fs::path> injected;
    if (!skills_dir.empty()) {
        for (const auto& entry : fs::directory_iterator(skills_dir))
            if (entry.is_directory()) injected.push_back(entry.path());
        std::sort(injected.begin(), injected.end());
    }

    SessionWorkspace ws = SessionWorkspace::create(home, read_file(instruction_file), inputs,
                                                   injected);
    SkillBank bank = SkillBank::open(home.skills_dir());
    AgentContext ctx(cfg.loop.budget);
    RunMeta meta = run_task(ws, ctx, bank, *model, home, cfg.loop);

    ojson out;
    out["session_id"] = ws.session_id();
    out["turn_count"] = meta.turn_count;
    out["success"] = meta.success.value_or(false);
    print_json(out, opts.plain);
    return 0;
}

int cmd_session_resume(const GlobalOpts& opts, const std::string& session_id) {
    AgentHome home = opts.home();
    RuntimeConfig cfg = load_runtime_config(home);
    auto model = make_model(opts, cfg);

    auto [ws, ctx] = resume_session(home, session_id, cfg.loop.budget);
    SkillBank bank = SkillBank::open(home.skills_dir());
    RunMeta meta = run_task(ws, ctx, bank, *model, home, cfg.loop);

    ojson out;
    out["session_id"] = ws.session_id();
    out["turn_count"] = meta.turn_count;
    out["success"] = meta.success.value_or(false);
    print_json(out, opts.plain);
    return 0;
}

int cmd_events(const GlobalOpts& opts, const std::string& session_id) {
    AgentHome home = opts.home();
    fs::path events = home.sessions_dir() / session_id / "events.jsonl";
    if (!fs::exists(events))
        throw Error(ErrorCode::not_found, "no events for session " + session_id);
    if (opts.plain) {
        SessionWorkspace ws = SessionWorkspace::open(home, session_id);
        for (const auto& r : ws.read_events())
            std::cout << r.seq << "\t" << r.ts << "\t" << to_string(r.kind) << "\n";
    } else {
        std::cout << read_file(events);  // lines pass through unmodified
    }
    return 0;
}

int cmd_replay(const GlobalOpts& opts, const std::string& session_id) {
    AgentHome home = opts.home();
    SessionWorkspace ws = SessionWorkspace::open(home, session_id);
    AgentContext ctx = ws.load_snapshot();
    ojson out = ojson::array();
    for (const auto& payload : ctx.replay_full_history()) out.push_back(payload.to_json());
    if (opts.plain) {
        for (size_t i = 0; i < out.size(); ++i)
            std::cout << "turn " << (i + 1) << ": " << out[i].value("text", std::string()) << "\n";
    } else {
        std::cout << out.dump(2) << "\n";
    }
    return 0;
}

int cmd_prune(const GlobalOpts& opts, int unused, int fails) {
    AgentHome home = opts.home();
    SkillBank bank = SkillBank::open(home.skills_dir());
    PrunePolicy policy;
    policy.unused_sessions = unused;
    policy.consecutive_failures = fails;
    auto removed = bank.prune(policy);
    ojson out;
    out["removed"] = removed;
    print_json(out, opts.plain);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"autoskill — skill-lifecycle agent runtime"};
    app.require_subcommand(1);

    GlobalOpts opts;
    app.add_option("--home", opts.home_flag, "agent home directory (default: $AUTOSKILL_HOME)");
    app.add_option("--model", opts.model_flag, "scripted:<fixture.json> or remote");
    app.add_flag("--plain", opts.plain, "human-readable output instead of JSON");

    auto* init = app.add_subcommand("init", "initialize the agent home scaffold");

    auto* skill = app.add_subcommand("skill", "skill package operations");
    skill->require_subcommand(1);
    std::string skill_dir, spec_file, distill_session;
    auto* validate = skill->add_subcommand("validate", "validate a skill package directory");
    validate->add_option("dir", skill_dir)->required();
    auto* evaluate = skill->add_subcommand("evaluate", "run a package's bundled tests in a sandbox");
    evaluate->add_option("dir", skill_dir)->required();
    auto* register_ = skill->add_subcommand("register", "evaluate and register a package");
    register_->add_option("dir", skill_dir)->required();
    auto* create = skill->add_subcommand("create", "generate, evaluate, and register a skill");
    create->add_option("--spec", spec_file, "JSON skill spec file")->required();
    auto* distill = skill->add_subcommand("distill", "distill a skill from a finished session");
    distill->add_option("--session", distill_session)->required();

    auto* catalog = app.add_subcommand("catalog", "print the skill catalog");

    auto* session = app.add_subcommand("session", "session operations");
    session->require_subcommand(1);
    std::string instruction_file, inputs_dir, session_skills_dir, resume_id;
    auto* run = session->add_subcommand("run", "run a task to completion");
    run->add_option("--instruction", instruction_file, "task prompt file")->required();
    run->add_option("--inputs", inputs_dir, "directory of input files");
    run->add_option("--skills", session_skills_dir, "directory of skill packages to inject");
    auto* resume = session->add_subcommand("resume", "resume a snapshotted session");
    resume->add_option("id", resume_id)->required();

    std::string events_id, replay_id;
    auto* events = app.add_subcommand("events", "stream a session's events.jsonl");
    events->add_option("id", events_id)->required();
    auto* replay = app.add_subcommand("replay", "replay a session's full history");
    replay->add_option("id", replay_id)->required();

    int prune_unused = constants::kPruneUnusedSessions;
    int prune_fails = constants::kPruneConsecutiveFailures;
    auto* prune = app.add_subcommand("prune", "remove unused or consistently failing skills");
    prune->add_option("--unused", prune_unused, "sessions without use before pruning");
    prune->add_option("--fails", prune_fails, "consecutive failures before pruning");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp")
            return app.exit(e);
        std::cerr << e.what() << "\n";
        std::cerr << "usage: see autoskill --help\n";
        return 2;
    }

    try {
        if (*init) return cmd_init(opts);
        if (*validate) return cmd_skill_validate(opts, skill_dir);
        if (*evaluate) return cmd_skill_evaluate(opts, skill_dir);
        if (*register_) return cmd_skill_register(opts, skill_dir);
        if (*create) return cmd_skill_create(opts, spec_file);
        if (*distill) return cmd_skill_distill(opts, distill_session);
        if (*catalog) return cmd_catalog(opts);
        if (*run) return cmd_session_run(opts, instruction_file, inputs_dir, session_skills_dir);
        if (*resume) return cmd_session_resume(opts, resume_id);
        if (*events) return cmd_events(opts, events_id);
        if (*replay) return cmd_replay(opts, replay_id);
        if (*prune) return cmd_prune(opts, prune_unused, prune_fails);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
