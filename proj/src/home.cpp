#include "autoskill/home.hpp"

#include <cstdlib>

#include "autoskill/errors.hpp"

namespace autoskill {

bool AgentHome::initialized() const {
    return fs::is_directory(skills_dir()) && fs::is_directory(sessions_dir()) &&
           fs::is_directory(long_term_memory_file().parent_path());
}

void AgentHome::init() const {
    fs::create_directories(skills_dir());
    fs::create_directories(sessions_dir());
    fs::create_directories(long_term_memory_file().parent_path());
    fs::create_directories(staging_dir());
}

AgentHome resolve_home(const std::optional<fs::path>& flag) {
    if (flag) return AgentHome(*flag);
    if (const char* env = std::getenv("AUTOSKILL_HOME"); env && *env) return AgentHome(env);
    const char* home = std::getenv("HOME");
    if (!home || !*home) home = "/tmp";
    return AgentHome(fs::path(home) / ".autoskill");
}

namespace {

std::optional<long> parse_long(const std::string& value) {
    try {
        size_t pos = 0;
        long v = std::stol(value, &pos);
        if (pos != value.size()) return std::nullopt;
        return v;
    } catch (...) {
        return std::nullopt;
    }
}

}  // namespace

RuntimeConfig parse_runtime_config(const std::string& text) {
    RuntimeConfig cfg;
    for (const auto& raw_line : split_lines(text)) {
        std::string line = raw_line;
        if (size_t hash = line.find('#'); hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;

        size_t sep = line.find('=');
        if (sep == std::string::npos) sep = line.find(':');
        if (sep == std::string::npos) continue;
        std::string key = trim(line.substr(0, sep));
        std::string value = trim(line.substr(sep + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
            value = value.substr(1, value.size() - 2);
        if (key.empty() || value.empty()) continue;

        auto num = parse_long(value);
        if (key == "model_id") cfg.model_id = value;
        else if (key == "endpoint") cfg.endpoint = value;
        else if (key == "api_key") cfg.api_key = value;
        else if (num) {
            LoopConfig& loop = cfg.loop;
            if (key == "tool_text_limit") loop.tool_text_limit = static_cast<std::size_t>(*num);
            else if (key == "tool_timeout_seconds") loop.tool_timeout = std::chrono::seconds(*num);
            else if (key == "terminal_timeout_seconds")
                loop.terminal_timeout = std::chrono::seconds(*num);
            else if (key == "exec_code_timeout_seconds")
                loop.exec_code_timeout = std::chrono::seconds(*num);
            else if (key == "verify_completion_timeout_seconds")
                loop.verify_completion_timeout = std::chrono::seconds(*num);
            else if (key == "model_timeout_seconds") loop.model_timeout = std::chrono::seconds(*num);
            else if (key == "max_retry") loop.max_retry = static_cast<int>(*num);
            else if (key == "verify_completion_turn_threshold")
                loop.verify_completion_turn_threshold = static_cast<int>(*num);
            else if (key == "compress_token_threshold")
                loop.budget.compress_token_threshold = static_cast<std::size_t>(*num);
            else if (key == "node_compress_token_threshold")
                loop.budget.node_compress_token_threshold = static_cast<std::size_t>(*num);
            else if (key == "keep_first_turns") loop.budget.keep_first_turns = static_cast<int>(*num);
            else if (key == "keep_last_turns") loop.budget.keep_last_turns = static_cast<int>(*num);
            else if (key == "max_turns") loop.max_turns = static_cast<int>(*num);
        }
    }
    return cfg;
}

RuntimeConfig load_runtime_config(const AgentHome& home) {
    if (!fs::exists(home.config_file())) return RuntimeConfig{};
    return parse_runtime_config(read_file(home.config_file()));
}

}  // namespace autoskill
