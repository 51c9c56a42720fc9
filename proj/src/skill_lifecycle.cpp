#include "autoskill/skill_lifecycle.hpp"

#include <algorithm>

#include "autoskill/errors.hpp"
#include "autoskill/memory_store.hpp"

namespace autoskill {

Trajectory load_trajectory(const AgentHome& home, const std::string& session_id) {
    SessionWorkspace ws = SessionWorkspace::open(home, session_id);
    AgentContext ctx = ws.load_snapshot();

    Trajectory traj;
    traj.session_id = session_id;
    traj.full_history = ctx.replay_full_history();
    for (const ConversationNode* node : ctx.active_chain())
        traj.active_view.push_back(node->effective_input());
    if (fs::exists(ws.run_meta_file()))
        traj.meta = RunMeta::from_json(ojson::parse(read_file(ws.run_meta_file())));
    return traj;
}

std::string serialize_trajectory(const Trajectory& traj, bool use_full_history) {
    const auto& turns = use_full_history ? traj.full_history : traj.active_view;
    std::string out = "session: " + traj.session_id + "\n";
    for (size_t i = 0; i < turns.size(); ++i) {
        out += "--- turn " + std::to_string(i + 1) + " ---\n";
        if (!turns[i].text.empty()) out += turns[i].text + "\n";
        for (const auto& call : turns[i].tool_calls)
            out += "tool: " + call.name + " " + call.arguments + "\n";
        for (const auto& obs : turns[i].observations) out += "observation: " + obs + "\n";
    }
    return out;
}

namespace {

void sink_event(const PipelineOptions& opts, EventKind kind, ojson payload) {
    if (opts.events) opts.events(kind, std::move(payload));
}

ModelResponse ask(ModelClient& model, const std::string& purpose, const std::string& prompt,
                  const PipelineOptions& opts) {
    ModelRequest req;
    req.purpose = purpose;
    req.turn_index = opts.turn_index;
    req.system_prompt = "You are the skill creation subsystem.";
    req.messages.push_back({{"role", "user"}, {"content", prompt}});
    ModelResponse resp = model.request(req);
    ojson payload;
    payload["purpose"] = purpose;
    payload["usage"] = {{"fresh_in", resp.usage.fresh_in},
                        {"cached_in", resp.usage.cached_in},
                        {"output", resp.usage.output}};
    sink_event(opts, EventKind::model_call, std::move(payload));
    return resp;
}

// One automatic re-ask before giving up on a malformed generation step.
std::string ask_validated(ModelClient& model, const std::string& purpose,
                          const std::string& prompt, const PipelineOptions& opts,
                          const std::function<std::string(const std::string&)>& check) {
    std::string text = ask(model, purpose, prompt, opts).text;
    std::string problem = check(text);
    if (problem.empty()) return text;
    std::string retry_prompt =
        prompt + "\n\nYour previous output was invalid: " + problem + "\nEmit a corrected version.";
    text = ask(model, purpose, retry_prompt, opts).text;
    problem = check(text);
    if (!problem.empty())
        throw Error(ErrorCode::generation_invalid, purpose + " failed after re-ask: " + problem);
    return text;
}

std::string frontmatter_name_of(const std::string& md_text) {
    for (const auto& line : split_lines(md_text)) {
        if (line.rfind("name:", 0) == 0) {
            std::string value = trim(line.substr(5));
            if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
                value = value.substr(1, value.size() - 2);
            return value;
        }
    }
    return "";
}

std::string skill_md_prompt(const SkillSpec& spec) {
    std::string p = "Write a complete SKILL.md for a new skill.\n";
    if (!spec.name.empty()) p += "name (must match exactly): " + spec.name + "\n";
    p += "purpose: " + spec.purpose + "\n";
    if (!spec.inputs.empty()) p += "inputs: " + spec.inputs + "\n";
    if (!spec.expected_outputs.empty()) p += "expected outputs: " + spec.expected_outputs + "\n";
    p += "Start with '---' YAML frontmatter containing name and description.";
    return p;
}

}  // namespace

SkillPackage create_skill(const SkillSpec& spec, ModelClient& model, const fs::path& staging,
                          const PipelineOptions& opts) {
    if (trim(spec.purpose).empty())
        throw Error(ErrorCode::usage_error, "skill spec needs a non-empty purpose");

    sink_event(opts, EventKind::observation,
               {{"stage", "create"}, {"name", spec.name}, {"purpose", spec.purpose}});

    // step 1: SKILL.md
    std::string md_text = ask_validated(
        model, "skill_generate_md", skill_md_prompt(spec), opts, [&](const std::string& text) {
            try {
                // when the spec does not pin a name, the model's choice
                // becomes the directory name
                std::string probe_name = spec.name.empty() ? frontmatter_name_of(text) : spec.name;
                parse_skill_md(text, probe_name);
                return std::string();
            } catch (const Error& e) {
                return std::string(e.what());
            }
        });

    std::string name = spec.name.empty() ? frontmatter_name_of(md_text) : spec.name;

    fs::path root = staging / name;
    fs::remove_all(root);
    fs::create_directories(root);
    write_file(root / "SKILL.md", md_text);

    // step 2: plan the internal structure
    std::string plan_prompt =
        "Plan the files for skill '" + name +
        "'. Reply with a JSON array of relative paths limited to scripts/, tests/, resources/, "
        "references/. Reply [] for a documentation-only skill.\n\nSKILL.md:\n" +
        md_text;
    std::vector<std::string> planned;
    std::string plan_text = ask_validated(
        model, "skill_plan_structure", plan_prompt, opts, [&](const std::string& text) {
            try {
                ojson arr = ojson::parse(text);
                if (!arr.is_array()) return std::string("expected a JSON array");
                for (const auto& item : arr) {
                    if (!item.is_string()) return std::string("array items must be strings");
                    std::string rel = item.get<std::string>();
                    fs::path p(rel);
                    auto first = p.begin();
                    if (p.empty() || first == p.end()) return std::string("empty path");
                    std::string top = first->string();
                    if (top != "scripts" && top != "tests" && top != "resources" &&
                        top != "references")
                        return "path outside the package subdirectories: " + rel;
                    contain_path(fs::path("/pkg"), rel);
                }
                return std::string();
            } catch (const nlohmann::json::exception& e) {
                return std::string(e.what());
            } catch (const Error& e) {
                return std::string(e.what());
            }
        });
    for (const auto& item : ojson::parse(plan_text)) planned.push_back(item.get<std::string>());

    // step 3: generate each planned file
    for (const auto& rel : planned) {
        ModelResponse resp = ask(model, "skill_generate_file:" + rel,
                                 "Write the complete contents of " + rel + " for skill '" + name +
                                     "'.\n\nSKILL.md:\n" + md_text,
                                 opts);
        write_file(contain_path(root, rel), resp.text);
    }

    ValidationReport report = validate_package(root);
    if (!report.ok()) {
        std::string detail;
        for (const auto& f : report.errors) detail += f.code + " " + f.message + "; ";
        throw Error(ErrorCode::generation_invalid, "staged package invalid: " + detail);
    }
    return parse_package(root);
}

EvaluationResult evaluate_skill(const SkillPackage& pkg, SandboxFactory& sandboxes,
                                const PipelineOptions& opts) {
    EvaluationResult result;
    if (pkg.root.empty())
        throw Error(ErrorCode::invalid_package, "cannot evaluate a package with no directory");

    std::vector<std::string> test_files;
    for (const auto& rel : pkg.files) {
        if (rel.rfind("tests/", 0) == 0) test_files.push_back(rel);
    }
    std::sort(test_files.begin(), test_files.end());

    if (test_files.empty()) {
        result.unevaluated = true;  // vacuously passed; registration warns
        sink_event(opts, EventKind::observation,
                   {{"stage", "evaluate"}, {"name", pkg.name()}, {"tests_run", 0},
                    {"tests_passed", 0}, {"unevaluated", true}});
        return result;
    }

    std::shared_ptr<Sandbox> sandbox;
    try {
        sandbox = sandboxes.create();
    } catch (const Error& e) {
        throw Error(ErrorCode::sandbox_failure, e.what());
    }

    std::string pkg_rel = "inputs/" + pkg.name();
    sandbox->upload(pkg.root / "SKILL.md", pkg_rel + "/SKILL.md");
    for (const auto& rel : pkg.files) sandbox->upload(pkg.root / rel, pkg_rel + "/" + rel);

    for (const auto& rel : test_files) {
        std::string runner = rel.size() > 3 && rel.substr(rel.size() - 3) == ".py" ? "python3" : "sh";
        std::string command = "cd '" + pkg_rel + "' && " + runner + " '" + rel + "'";
        ExecResult exec = sandbox->run(command, opts.test_timeout);
        ++result.tests_run;
        if (exec.exit_code == 0 && !exec.timed_out) {
            ++result.tests_passed;
        } else {
            EvaluationFailure failure;
            failure.test_file = rel;
            failure.exit_code = exec.exit_code;
            failure.timed_out = exec.timed_out;
            failure.output = exec.stdout_text + exec.stderr_text;
            result.failures.push_back(std::move(failure));
        }
    }
    sandbox->close();

    sink_event(opts, EventKind::observation,
               {{"stage", "evaluate"}, {"name", pkg.name()}, {"tests_run", result.tests_run},
                {"tests_passed", result.tests_passed}, {"unevaluated", false}});
    return result;
}

std::pair<SkillPackage, EvaluationResult> refine_skill(SkillPackage pkg, EvaluationResult eval,
                                                       ModelClient& model,
                                                       SandboxFactory& sandboxes,
                                                       const PipelineOptions& opts,
                                                       int* rounds_used) {
    if (eval.all_passed())
        throw Error(ErrorCode::usage_error, "refine_skill called without failures");

    for (int round = 1; round <= opts.max_refine_rounds; ++round) {
        if (rounds_used) *rounds_used = round;
        std::string traces;
        for (const auto& f : eval.failures) {
            traces += f.test_file + " exit=" + std::to_string(f.exit_code) +
                      (f.timed_out ? " (timed out)" : "") + "\n" + f.output + "\n";
        }
        std::string prompt =
            "Tests failed for skill '" + pkg.name() +
            "'. Reply with a JSON object mapping relative file paths to complete replacement "
            "contents.\n\nFailures:\n" +
            traces;

        ModelResponse resp = ask(model, "skill_refine", prompt, opts);
        sink_event(opts, EventKind::observation,
                   {{"stage", "refine"}, {"name", pkg.name()}, {"round", round}});

        bool applied = false;
        try {
            ojson patches = ojson::parse(resp.text);
            if (!patches.is_object())
                throw Error(ErrorCode::generation_invalid, "patch must be a JSON object");
            for (const auto& [rel, content] : patches.items()) {
                fs::path target = contain_path(pkg.root, rel);  // PathEscape on breakout
                if (!content.is_string())
                    throw Error(ErrorCode::generation_invalid, "patch values must be strings");
                write_file(target, content.get<std::string>());
                applied = true;
            }
        } catch (const nlohmann::json::exception&) {
            applied = false;  // malformed patch: burn the round
        } catch (const Error& e) {
            if (e.code() != ErrorCode::path_escape && e.code() != ErrorCode::generation_invalid)
                throw;
            applied = false;  // rejected patch: burn the round
        }

        if (applied) {
            ValidationReport report = validate_package(pkg.root);
            if (report.ok()) {
                pkg = parse_package(pkg.root);
                eval = evaluate_skill(pkg, sandboxes, opts);
                if (eval.all_passed()) return {pkg, eval};
            }
        }
    }
    throw Error(ErrorCode::refinement_exhausted,
                "skill '" + pkg.name() + "' still failing after " +
                    std::to_string(opts.max_refine_rounds) + " refinement rounds");
}

SkillPackage distill_skill_from_trajectory(const Trajectory& traj, ModelClient& model,
                                           const fs::path& staging, const PipelineOptions& opts,
                                           bool use_full_history) {
    bool successful = (traj.meta.reward && *traj.meta.reward > 0.0) ||
                      (traj.meta.success && *traj.meta.success);
    if (!successful)
        throw Error(ErrorCode::source_not_successful,
                    "session " + traj.session_id + " did not end successfully");

    std::string prompt =
        "Distill the following successful trajectory into a reusable skill. Reply with a JSON "
        "object {\"name\", \"purpose\", \"inputs\", \"expected_outputs\"}.\n\n" +
        serialize_trajectory(traj, use_full_history);

    std::string spec_text = ask_validated(
        model, "skill_distill_spec", prompt, opts, [](const std::string& text) {
            try {
                ojson j = ojson::parse(text);
                if (!j.is_object() || trim(j.value("purpose", "")).empty())
                    return std::string("expected an object with a non-empty purpose");
                return std::string();
            } catch (const nlohmann::json::exception& e) {
                return std::string(e.what());
            }
        });

    ojson spec_json = ojson::parse(spec_text);
    SkillSpec spec;
    spec.name = spec_json.value("name", "");
    spec.purpose = spec_json.value("purpose", "");
    spec.inputs = spec_json.value("inputs", "");
    spec.expected_outputs = spec_json.value("expected_outputs", "");

    SkillPackage pkg = create_skill(spec, model, staging, opts);

    // provenance: which session this skill was distilled from
    std::string body = pkg.body;
    if (!body.empty() && body.back() != '\n') body += '\n';
    body += "\n## Provenance\nsource_session: " + traj.session_id + "\n";
    ParsedSkillMd rendered{pkg.frontmatter, body, true};
    write_file(pkg.root / "SKILL.md", render_skill_md(rendered));
    return parse_package(pkg.root);
}

PipelineOutcome run_creation_pipeline(const SkillSpec& spec, ModelClient& model, SkillBank& bank,
                                      SandboxFactory& sandboxes, const fs::path& staging,
                                      const PipelineOptions& opts) {
    PipelineOutcome outcome;
    SkillPackage pkg = create_skill(spec, model, staging, opts);
    outcome.name = pkg.name();
    outcome.staged_root = pkg.root;

    EvaluationResult eval = evaluate_skill(pkg, sandboxes, opts);
    if (!eval.all_passed()) {
        try {
            std::tie(pkg, eval) = refine_skill(pkg, eval, model, sandboxes, opts,
                                               &outcome.refine_rounds);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::refinement_exhausted) throw;
            outcome.final_eval = eval;
            sink_event(opts, EventKind::observation,
                       {{"stage", "abandon"}, {"name", pkg.name()}});
            return outcome;  // abandoned; staging keeps the remains
        }
    }

    bank.register_skill(pkg, eval);
    sink_event(opts, EventKind::observation,
               {{"stage", "register"}, {"name", pkg.name()}, {"tests_run", eval.tests_run}});
    outcome.registered = true;
    outcome.final_eval = eval;
    return outcome;
}

}  // namespace autoskill
