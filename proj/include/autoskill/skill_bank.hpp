#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "autoskill/skill_package.hpp"
#include "autoskill/util.hpp"

namespace autoskill {

// Outcome of running a skill's bundled tests. Produced by evaluate_skill
// (skill_lifecycle) and consumed by the registration gate here.
struct EvaluationFailure {
    std::string test_file;
    int exit_code = 0;
    bool timed_out = false;
    std::string output;
};

struct EvaluationResult {
    int tests_run = 0;
    int tests_passed = 0;
    std::vector<EvaluationFailure> failures;
    // True when the package ships no tests/: all_passed holds vacuously.
    bool unevaluated = false;

    bool all_passed() const { return tests_passed == tests_run && failures.empty(); }
    ojson to_json() const;
    static EvaluationResult from_json(const ojson& j);
};

struct UsageRecord {
    std::string skill;
    std::string session_id;
    bool success = false;
    std::string ts;
};

struct PrunePolicy {
    int unused_sessions = 20;       // U: sessions without any use
    int consecutive_failures = 3;   // F
};

struct SkillIndexEntry {
    std::string name;
    std::string description;
    std::string registered_at;
    long registered_session_seq = 0;
    long last_used_session_seq = 0;
    long use_count = 0;
    int consecutive_failures = 0;
};

struct ResolvedSkill {
    SkillPackage package;
    std::string memory_text;  // "" when .memory.md does not exist
};

struct RegistrationOutcome {
    std::string name;
    bool unevaluated_warning = false;
};

// The on-disk skill bank under `<agent-home>/skills/`: one directory per
// skill, an index file with usage counters, and append-only registry/usage
// logs. Mutations take an advisory lock in the bank root.
class SkillBank {
public:
    static SkillBank open(const fs::path& skills_dir, TimeSource clock = system_clock_source());

    const fs::path& home() const { return home_; }
    bool has(const std::string& name) const { return index_.count(name) > 0; }
    std::size_t size() const { return index_.size(); }

    // Gated registration: refuses unless eval.all_passed. Throws
    // EvaluationFailed (with failing test detail), DuplicateName,
    // InvalidPackage. The staged package directory is copied in; the staging
    // copy is left for the caller to clean up.
    RegistrationOutcome register_skill(const SkillPackage& pkg, const EvaluationResult& eval);

    // Lexicographically ordered catalog of every indexed skill.
    std::vector<CatalogEntry> catalog() const;

    // Full package plus per-skill memory text. Throws UnknownSkill.
    ResolvedSkill resolve(const std::string& name) const;

    // Removes skills unused for >= U sessions or with >= F consecutive
    // failures; deletes directories and index entries. Returns removed
    // names, sorted.
    std::vector<std::string> prune(const PrunePolicy& policy);

    // Registers `merged` and removes `names` atomically; the originals'
    // memory files are concatenated (name order, with source headers) into
    // the merged skill's memory. Throws before mutating on any gate failure.
    RegistrationOutcome merge_skills(const std::vector<std::string>& names,
                                     const SkillPackage& merged, const EvaluationResult& eval);

    // One record per (skill, session); resets or bumps the consecutive
    // failure counter.
    void record_usage(const std::string& name, const std::string& session_id, bool success);

    // Advances the bank-wide session counter; prune's "unused for U
    // sessions" is measured against it.
    void note_session_end(const std::string& session_id);

    long session_seq() const { return session_seq_; }
    const SkillIndexEntry* find_entry(const std::string& name) const;

    fs::path skill_dir(const std::string& name) const { return home_ / name; }
    fs::path registry_log() const { return home_ / ".registry.jsonl"; }
    fs::path usage_log() const { return home_ / ".usage.jsonl"; }

private:
    SkillBank() = default;
    void load_index();
    void save_index() const;
    void log_registry(const std::string& action, const std::string& name, bool eval_passed,
                      int tests_run);

    fs::path home_;
    TimeSource clock_;
    long session_seq_ = 0;
    std::map<std::string, SkillIndexEntry> index_;
};

// YAML catalog document: `- name: ...` / `  description: ...` per entry.
std::string catalog_yaml(const std::vector<CatalogEntry>& entries);

}  // namespace autoskill
