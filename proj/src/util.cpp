#include "autoskill/util.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "autoskill/errors.hpp"

namespace autoskill {

const char* to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::missing_frontmatter: return "MissingFrontmatter";
        case ErrorCode::missing_required_key: return "MissingRequiredKey";
        case ErrorCode::name_mismatch: return "NameMismatch";
        case ErrorCode::malformed_name: return "MalformedName";
        case ErrorCode::destination_exists: return "DestinationExists";
        case ErrorCode::invalid_package: return "InvalidPackage";
        case ErrorCode::evaluation_failed: return "EvaluationFailed";
        case ErrorCode::duplicate_name: return "DuplicateName";
        case ErrorCode::unknown_skill: return "UnknownSkill";
        case ErrorCode::cycle_detected: return "CycleDetected";
        case ErrorCode::broken_history_link: return "BrokenHistoryLink";
        case ErrorCode::empty_content: return "EmptyContent";
        case ErrorCode::home_not_initialized: return "HomeNotInitialized";
        case ErrorCode::sequence_gap: return "SequenceGap";
        case ErrorCode::snapshot_missing: return "SnapshotMissing";
        case ErrorCode::snapshot_corrupt: return "SnapshotCorrupt";
        case ErrorCode::already_finalized: return "AlreadyFinalized";
        case ErrorCode::backend_unavailable: return "BackendUnavailable";
        case ErrorCode::sandbox_closed: return "SandboxClosed";
        case ErrorCode::path_escape: return "PathEscape";
        case ErrorCode::not_found: return "NotFound";
        case ErrorCode::sandbox_failure: return "SandboxFailure";
        case ErrorCode::model_transient_failure: return "ModelTransientFailure";
        case ErrorCode::model_permanent_failure: return "ModelPermanentFailure";
        case ErrorCode::model_exhausted_retries: return "ModelExhaustedRetries";
        case ErrorCode::loop_aborted: return "LoopAborted";
        case ErrorCode::generation_invalid: return "GenerationInvalid";
        case ErrorCode::refinement_exhausted: return "RefinementExhausted";
        case ErrorCode::source_not_successful: return "SourceNotSuccessful";
        case ErrorCode::io_failure: return "IoFailure";
        case ErrorCode::usage_error: return "UsageError";
    }
    return "UnknownError";
}

// --- clocks -----------------------------------------------------------------

TimeSource system_clock_source() {
    return [] { return std::chrono::system_clock::now(); };
}

TimeSource fixed_clock_source(std::chrono::system_clock::time_point at) {
    return [at] { return at; };
}

namespace {

std::tm to_utc_tm(std::chrono::system_clock::time_point tp) {
    std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm out{};
    gmtime_r(&t, &out);
    return out;
}

}  // namespace

std::string format_utc_header(std::chrono::system_clock::time_point tp) {
    std::tm tm = to_utc_tm(tp);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d %02d:%02d:%02d UTC", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string format_iso8601(std::chrono::system_clock::time_point tp) {
    std::tm tm = to_utc_tm(tp);
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                  tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::optional<std::chrono::system_clock::time_point> parse_utc_header(const std::string& text) {
    std::tm tm{};
    int y, mo, d, h, mi, s;
    char tail[8] = {0};
    if (std::sscanf(text.c_str(), "%4d-%2d-%2d %2d:%2d:%2d %3s", &y, &mo, &d, &h, &mi, &s, tail) != 7)
        return std::nullopt;
    if (std::string(tail) != "UTC") return std::nullopt;
    tm.tm_year = y - 1900;
    tm.tm_mon = mo - 1;
    tm.tm_mday = d;
    tm.tm_hour = h;
    tm.tm_min = mi;
    tm.tm_sec = s;
    std::time_t t = timegm(&tm);
    if (t == -1) return std::nullopt;
    return std::chrono::system_clock::from_time_t(t);
}

// --- ids --------------------------------------------------------------------

namespace {

std::string hex_id(std::uint64_t a, std::uint64_t b) {
    char buf[33];
    std::snprintf(buf, sizeof(buf), "%016llx%016llx", static_cast<unsigned long long>(a),
                  static_cast<unsigned long long>(b));
    return buf;
}

}  // namespace

IdSource random_id_source() {
    auto rng = std::make_shared<std::mt19937_64>(std::random_device{}());
    return [rng] { return hex_id((*rng)(), (*rng)()); };
}

IdSource seeded_id_source(std::uint64_t seed) {
    auto rng = std::make_shared<std::mt19937_64>(seed);
    return [rng] { return hex_id((*rng)(), (*rng)()); };
}

// --- filesystem helpers -------------------------------------------------------

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::io_failure, "cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::io_failure, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::io_failure, "short write to " + path.string());
}

void atomic_write_file(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw Error(ErrorCode::io_failure, "cannot write " + tmp.string());
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw Error(ErrorCode::io_failure, "short write to " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw Error(ErrorCode::io_failure, "rename " + tmp.string() + ": " + ec.message());
}

void append_file_locked(const fs::path& path, std::string_view content) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
    if (fd < 0) throw Error(ErrorCode::io_failure, "cannot open " + path.string());
    ::flock(fd, LOCK_EX);
    ssize_t written = 0;
    const char* data = content.data();
    ssize_t remaining = static_cast<ssize_t>(content.size());
    while (remaining > 0) {
        ssize_t n = ::write(fd, data + written, static_cast<size_t>(remaining));
        if (n < 0) {
            ::flock(fd, LOCK_UN);
            ::close(fd);
            throw Error(ErrorCode::io_failure, "write failed on " + path.string());
        }
        written += n;
        remaining -= n;
    }
    ::fsync(fd);
    ::flock(fd, LOCK_UN);
    ::close(fd);
}

void copy_tree(const fs::path& from, const fs::path& to) {
    fs::create_directories(to);
    fs::copy(from, to, fs::copy_options::recursive | fs::copy_options::copy_symlinks);
}

std::vector<std::string> list_files_recursive(const fs::path& root) {
    std::vector<std::string> out;
    if (!fs::exists(root)) return out;
    for (const auto& entry : fs::recursive_directory_iterator(root)) {
        if (entry.is_regular_file()) out.push_back(fs::relative(entry.path(), root).generic_string());
    }
    std::sort(out.begin(), out.end());
    return out;
}

ScopedFileLock::ScopedFileLock(const fs::path& path, bool exclusive) {
    fd_ = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
    if (fd_ < 0) return;  // advisory: proceed unlocked rather than fail the read
    int op = exclusive ? LOCK_EX : LOCK_SH;
    if (exclusive) {
        ::flock(fd_, op);
        return;
    }
    // Readers: one retry on contention, then proceed without the lock.
    if (::flock(fd_, op | LOCK_NB) != 0) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        ::flock(fd_, op | LOCK_NB);
    }
}

ScopedFileLock::~ScopedFileLock() {
    if (fd_ >= 0) {
        ::flock(fd_, LOCK_UN);
        ::close(fd_);
    }
}

TempDir::TempDir(const std::string& prefix) {
    static std::mt19937_64 rng(std::random_device{}());
    static std::mutex mu;
    std::uint64_t tag;
    {
        std::lock_guard<std::mutex> lock(mu);
        tag = rng();
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "-%016llx", static_cast<unsigned long long>(tag));
    path_ = fs::temp_directory_path() / (prefix + buf);
    fs::create_directories(path_);
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

// --- misc ---------------------------------------------------------------------

std::string short_digest(std::string_view text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

bool is_kebab_case(std::string_view name) {
    if (name.empty()) return false;
    bool prev_dash = true;  // leading dash forbidden
    for (char c : name) {
        if (c == '-') {
            if (prev_dash) return false;
            prev_dash = true;
        } else if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
            prev_dash = false;
        } else {
            return false;
        }
    }
    return !prev_dash;  // trailing dash forbidden
}

std::string trim(std::string_view text) {
    size_t begin = 0;
    size_t end = text.size();
    while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
    while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
    return std::string(text.substr(begin, end - begin));
}

std::vector<std::string> split_lines(std::string_view text) {
    std::vector<std::string> lines;
    size_t start = 0;
    while (start <= text.size()) {
        size_t nl = text.find('\n', start);
        if (nl == std::string_view::npos) {
            if (start < text.size()) lines.emplace_back(text.substr(start));
            break;
        }
        lines.emplace_back(text.substr(start, nl - start));
        start = nl + 1;
    }
    return lines;
}

}  // namespace autoskill
