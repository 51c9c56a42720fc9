#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace autoskill {

namespace fs = std::filesystem;

// Insertion-ordered JSON; used for every on-disk JSON artifact so key order
// is stable across runs.
using ojson = nlohmann::ordered_json;

// --- clocks -----------------------------------------------------------------

// Injected wall clock. Tests pass fixed or stepping clocks for determinism.
using TimeSource = std::function<std::chrono::system_clock::time_point()>;

TimeSource system_clock_source();
TimeSource fixed_clock_source(std::chrono::system_clock::time_point at);

// `YYYY-MM-DD HH:MM:SS UTC` (memory block headers).
std::string format_utc_header(std::chrono::system_clock::time_point tp);
// `YYYY-MM-DDTHH:MM:SSZ` (event stream, run metadata).
std::string format_iso8601(std::chrono::system_clock::time_point tp);
std::optional<std::chrono::system_clock::time_point> parse_utc_header(const std::string& text);

// --- ids --------------------------------------------------------------------

// 32-hex opaque identifiers (session ids, node ids, sandbox ids).
using IdSource = std::function<std::string()>;

IdSource random_id_source();
IdSource seeded_id_source(std::uint64_t seed);

// --- filesystem helpers ------------------------------------------------------

std::string read_file(const fs::path& path);
void write_file(const fs::path& path, std::string_view content);
// Write to a sibling temp file, then rename over the target.
void atomic_write_file(const fs::path& path, std::string_view content);
void append_file_locked(const fs::path& path, std::string_view content);
void copy_tree(const fs::path& from, const fs::path& to);
// Sorted relative paths of every regular file under root.
std::vector<std::string> list_files_recursive(const fs::path& root);

// Scoped advisory lock on `path` (flock). `exclusive=false` takes a shared
// lock and tolerates contention: one retry, then proceeds unlocked.
class ScopedFileLock {
public:
    ScopedFileLock(const fs::path& path, bool exclusive);
    ~ScopedFileLock();
    ScopedFileLock(const ScopedFileLock&) = delete;
    ScopedFileLock& operator=(const ScopedFileLock&) = delete;

private:
    int fd_ = -1;
};

// Self-deleting temporary directory for tests and staging scratch space.
class TempDir {
public:
    explicit TempDir(const std::string& prefix = "autoskill");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

// --- misc ---------------------------------------------------------------------

// FNV-1a over `text`, rendered as 16 hex chars. Used for event digests.
std::string short_digest(std::string_view text);

bool is_kebab_case(std::string_view name);

std::string trim(std::string_view text);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace autoskill
