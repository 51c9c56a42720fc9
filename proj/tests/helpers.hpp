#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "autoskill/context_dag.hpp"
#include "autoskill/home.hpp"
#include "autoskill/util.hpp"

namespace autoskill::test {

inline fs::path fixtures_dir() { return fs::path(AUTOSKILL_FIXTURES_DIR); }
inline fs::path fixture(const std::string& rel) { return fixtures_dir() / rel; }

inline std::chrono::system_clock::time_point base_time() {
    // 2026-05-07 10:34:33 UTC
    std::tm tm{};
    tm.tm_year = 2026 - 1900;
    tm.tm_mon = 4;
    tm.tm_mday = 7;
    tm.tm_hour = 10;
    tm.tm_min = 34;
    tm.tm_sec = 33;
    return std::chrono::system_clock::from_time_t(timegm(&tm));
}

// Advances by `step` on every call.
inline TimeSource stepping_clock(std::chrono::system_clock::time_point start,
                                 std::chrono::seconds step = std::chrono::seconds(1)) {
    auto state = std::make_shared<std::chrono::system_clock::time_point>(start);
    return [state, step] {
        auto now = *state;
        *state += step;
        return now;
    };
}

inline AgentHome make_home(const fs::path& root) {
    AgentHome home(root);
    home.init();
    return home;
}

// Deterministic stub: a fixed-size summary regardless of input.
inline Summarizer fixed_summarizer(std::size_t bytes) {
    return [bytes](const std::vector<TurnPayload>&) { return std::string(bytes, 's'); };
}

// Payload whose byte_length is exactly `bytes`.
inline TurnPayload payload_of_bytes(std::size_t bytes, char fill = 'x') {
    TurnPayload p;
    p.text.assign(bytes, fill);
    return p;
}

inline std::string doc_only_skill_md(const std::string& name, const std::string& description) {
    return "---\nname: " + name + "\ndescription: " + description + "\n---\n# " + name + "\n";
}

// Writes a minimal package directory and returns its root.
inline fs::path write_doc_skill(const fs::path& parent, const std::string& name,
                                const std::string& description) {
    fs::path root = parent / name;
    fs::create_directories(root);
    write_file(root / "SKILL.md", doc_only_skill_md(name, description));
    return root;
}

}  // namespace autoskill::test
