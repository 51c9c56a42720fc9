#include "autoskill/skill_bank.hpp"

#include <algorithm>

#include "autoskill/errors.hpp"
#include "autoskill/memory_store.hpp"

namespace autoskill {

ojson EvaluationResult::to_json() const {
    ojson j;
    j["tests_run"] = tests_run;
    j["tests_passed"] = tests_passed;
    j["unevaluated"] = unevaluated;
    j["failures"] = ojson::array();
    for (const auto& f : failures) {
        j["failures"].push_back({{"test_file", f.test_file},
                                 {"exit_code", f.exit_code},
                                 {"timed_out", f.timed_out},
                                 {"output", f.output}});
    }
    return j;
}

EvaluationResult EvaluationResult::from_json(const ojson& j) {
    EvaluationResult r;
    r.tests_run = j.value("tests_run", 0);
    r.tests_passed = j.value("tests_passed", 0);
    r.unevaluated = j.value("unevaluated", false);
    for (const auto& f : j.value("failures", ojson::array())) {
        r.failures.push_back({f.value("test_file", ""), f.value("exit_code", 0),
                              f.value("timed_out", false), f.value("output", "")});
    }
    return r;
}

namespace {

class EvaluationFailedError : public Error {
public:
    explicit EvaluationFailedError(const EvaluationResult& result)
        : Error(ErrorCode::evaluation_failed, describe(result)) {}

private:
    static std::string describe(const EvaluationResult& r) {
        std::string msg = std::to_string(r.failures.size()) + " of " +
                          std::to_string(r.tests_run) + " tests failed:";
        for (const auto& f : r.failures) {
            msg += " [" + f.test_file + " exit=" + std::to_string(f.exit_code) +
                   (f.timed_out ? " timed_out" : "") + " output=" + f.output + "]";
        }
        return msg;
    }
};

}  // namespace

SkillBank SkillBank::open(const fs::path& skills_dir, TimeSource clock) {
    SkillBank bank;
    bank.home_ = skills_dir;
    bank.clock_ = std::move(clock);
    fs::create_directories(skills_dir);
    bank.load_index();
    return bank;
}

void SkillBank::load_index() {
    fs::path index_file = home_ / ".index.json";
    if (fs::exists(index_file)) {
        ojson j = ojson::parse(read_file(index_file));
        session_seq_ = j.value("session_seq", 0L);
        for (const auto& e : j.value("skills", ojson::array())) {
            SkillIndexEntry entry;
            entry.name = e.value("name", "");
            entry.description = e.value("description", "");
            entry.registered_at = e.value("registered_at", "");
            entry.registered_session_seq = e.value("registered_session_seq", 0L);
            entry.last_used_session_seq = e.value("last_used_session_seq", 0L);
            entry.use_count = e.value("use_count", 0L);
            entry.consecutive_failures = e.value("consecutive_failures", 0);
            if (!entry.name.empty()) index_[entry.name] = entry;
        }
        // drop index entries whose directory vanished underneath us
        for (auto it = index_.begin(); it != index_.end();) {
            if (!fs::is_directory(home_ / it->first)) it = index_.erase(it);
            else ++it;
        }
        return;
    }
    // no index: adopt whatever valid packages already sit in the bank
    if (!fs::exists(home_)) return;
    for (const auto& entry : fs::directory_iterator(home_)) {
        if (!entry.is_directory()) continue;
        if (!validate_package(entry.path()).ok()) continue;
        SkillPackage pkg = parse_package(entry.path());
        SkillIndexEntry e;
        e.name = pkg.name();
        e.description = pkg.frontmatter.description;
        e.registered_at = format_iso8601(clock_());
        index_[e.name] = e;
    }
    if (!index_.empty()) save_index();
}

void SkillBank::save_index() const {
    ojson j;
    j["session_seq"] = session_seq_;
    j["skills"] = ojson::array();
    for (const auto& [name, e] : index_) {
        j["skills"].push_back({{"name", e.name},
                               {"description", e.description},
                               {"registered_at", e.registered_at},
                               {"registered_session_seq", e.registered_session_seq},
                               {"last_used_session_seq", e.last_used_session_seq},
                               {"use_count", e.use_count},
                               {"consecutive_failures", e.consecutive_failures}});
    }
    atomic_write_file(home_ / ".index.json", j.dump(2) + "\n");
}

void SkillBank::log_registry(const std::string& action, const std::string& name, bool eval_passed,
                             int tests_run) {
    ojson j;
    j["ts"] = format_iso8601(clock_());
    j["action"] = action;
    j["name"] = name;
    j["eval_passed"] = eval_passed;
    j["tests_run"] = tests_run;
    append_file_locked(registry_log(), j.dump() + "\n");
}

RegistrationOutcome SkillBank::register_skill(const SkillPackage& pkg,
                                              const EvaluationResult& eval) {
    ScopedFileLock lock(home_ / ".lock", /*exclusive=*/true);

    if (pkg.root.empty() || !validate_package(pkg.root).ok())
        throw Error(ErrorCode::invalid_package, "package fails validation: " + pkg.name());
    if (!eval.all_passed()) {
        log_registry("register_refused", pkg.name(), false, eval.tests_run);
        throw EvaluationFailedError(eval);
    }
    if (index_.count(pkg.name())) {
        throw Error(ErrorCode::duplicate_name,
                    "a skill named '" + pkg.name() + "' is already registered");
    }

    write_skill_package(pkg, home_);

    SkillIndexEntry entry;
    entry.name = pkg.name();
    entry.description = pkg.frontmatter.description;
    entry.registered_at = format_iso8601(clock_());
    entry.registered_session_seq = session_seq_;
    entry.last_used_session_seq = session_seq_;
    index_[entry.name] = entry;
    save_index();
    log_registry("register", pkg.name(), true, eval.tests_run);

    return {pkg.name(), eval.unevaluated};
}

std::vector<CatalogEntry> SkillBank::catalog() const {
    std::vector<CatalogEntry> entries;
    entries.reserve(index_.size());
    for (const auto& [name, e] : index_) entries.push_back({e.name, e.description});
    // std::map iteration is already lexicographic; keep the sort explicit
    std::sort(entries.begin(), entries.end(),
              [](const CatalogEntry& a, const CatalogEntry& b) { return a.name < b.name; });
    return entries;
}

std::string catalog_yaml(const std::vector<CatalogEntry>& entries) {
    std::string out;
    for (const auto& e : entries) {
        out += "- name: " + e.name + "\n";
        out += "  description: " + e.description + "\n";
    }
    return out;
}

ResolvedSkill SkillBank::resolve(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end())
        throw Error(ErrorCode::unknown_skill, "no skill named '" + name + "'");
    ScopedFileLock lock(home_ / ".lock", /*exclusive=*/false);
    ResolvedSkill out;
    out.package = parse_package(skill_dir(name));
    out.memory_text = read_memory_text(skill_dir(name) / ".memory.md");
    return out;
}

std::vector<std::string> SkillBank::prune(const PrunePolicy& policy) {
    ScopedFileLock lock(home_ / ".lock", /*exclusive=*/true);
    std::vector<std::string> removed;
    for (auto it = index_.begin(); it != index_.end();) {
        const SkillIndexEntry& e = it->second;
        long last_seen = std::max(e.last_used_session_seq, e.registered_session_seq);
        bool unused = (session_seq_ - last_seen) >= policy.unused_sessions;
        bool failing = e.consecutive_failures >= policy.consecutive_failures;
        if (unused || failing) {
            removed.push_back(e.name);
            fs::remove_all(skill_dir(e.name));
            log_registry("prune", e.name, false, 0);
            it = index_.erase(it);
        } else {
            ++it;
        }
    }
    if (!removed.empty()) save_index();
    std::sort(removed.begin(), removed.end());
    return removed;
}

RegistrationOutcome SkillBank::merge_skills(const std::vector<std::string>& names,
                                            const SkillPackage& merged,
                                            const EvaluationResult& eval) {
    ScopedFileLock lock(home_ / ".lock", /*exclusive=*/true);

    for (const auto& name : names) {
        if (!index_.count(name))
            throw Error(ErrorCode::unknown_skill, "merge source '" + name + "' is not registered");
    }
    if (merged.root.empty() || !validate_package(merged.root).ok())
        throw Error(ErrorCode::invalid_package, "merged package fails validation");
    if (!eval.all_passed()) {
        log_registry("merge_refused", merged.name(), false, eval.tests_run);
        throw EvaluationFailedError(eval);
    }
    if (index_.count(merged.name()) &&
        std::find(names.begin(), names.end(), merged.name()) == names.end()) {
        throw Error(ErrorCode::duplicate_name,
                    "merged name '" + merged.name() + "' collides with a registered skill");
    }

    // All gates passed; stage the new directory fully before touching the
    // originals so a failure mid-way can roll back.
    std::vector<std::string> sorted_names = names;
    std::sort(sorted_names.begin(), sorted_names.end());

    fs::path stage = home_ / (".merge-stage-" + merged.name());
    fs::remove_all(stage);
    fs::create_directories(stage);
    try {
        fs::path staged_pkg = write_skill_package(merged, stage);
        std::string merged_memory;
        for (const auto& name : sorted_names) {
            fs::path mem = skill_dir(name) / ".memory.md";
            if (!fs::exists(mem)) continue;
            merged_memory += "## " + format_utc_header(clock_()) + "\n[memory merged from '" +
                             name + "']\n\n";
            merged_memory += read_file(mem);
        }
        if (!merged_memory.empty()) write_file(staged_pkg / ".memory.md", merged_memory);

        for (const auto& name : sorted_names) fs::remove_all(skill_dir(name));
        fs::rename(staged_pkg, skill_dir(merged.name()));
        fs::remove_all(stage);
    } catch (...) {
        std::error_code ec;
        fs::remove_all(stage, ec);
        throw;
    }

    for (const auto& name : sorted_names) {
        index_.erase(name);
        log_registry("merge_removed", name, true, 0);
    }
    SkillIndexEntry entry;
    entry.name = merged.name();
    entry.description = merged.frontmatter.description;
    entry.registered_at = format_iso8601(clock_());
    entry.registered_session_seq = session_seq_;
    entry.last_used_session_seq = session_seq_;
    index_[entry.name] = entry;
    save_index();
    log_registry("merge_register", merged.name(), true, eval.tests_run);
    return {merged.name(), eval.unevaluated};
}

void SkillBank::record_usage(const std::string& name, const std::string& session_id,
                             bool success) {
    auto it = index_.find(name);
    if (it == index_.end())
        throw Error(ErrorCode::unknown_skill, "no skill named '" + name + "'");
    ScopedFileLock lock(home_ / ".lock", /*exclusive=*/true);

    ojson j;
    j["ts"] = format_iso8601(clock_());
    j["name"] = name;
    j["session"] = session_id;
    j["outcome"] = success ? "success" : "failure";
    append_file_locked(usage_log(), j.dump() + "\n");

    SkillIndexEntry& e = it->second;
    e.use_count += 1;
    e.last_used_session_seq = session_seq_;
    if (success) {
        e.consecutive_failures = 0;
    } else {
        e.consecutive_failures += 1;
    }
    save_index();
}

void SkillBank::note_session_end(const std::string&) {
    ScopedFileLock lock(home_ / ".lock", /*exclusive=*/true);
    session_seq_ += 1;
    save_index();
}

const SkillIndexEntry* SkillBank::find_entry(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : &it->second;
}

}  // namespace autoskill
