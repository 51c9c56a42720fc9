#pragma once

#include <chrono>
#include <string>
#include <vector>

#include "autoskill/util.hpp"

namespace autoskill {

struct ExecResult {
    int exit_code = -1;
    std::string stdout_text;
    std::string stderr_text;
    double duration_seconds = 0.0;
    bool timed_out = false;
};

// Runs `command` through `/bin/sh -c` with the given working directory and a
// fully replaced environment. The child is killed once `timeout` elapses
// (SIGKILL on the whole process group); `timed_out` is set and the kill status
// reported as the exit code.
ExecResult run_shell_command(const std::string& command, const fs::path& cwd,
                             const std::vector<std::string>& env,
                             std::chrono::milliseconds timeout);

// Minimal environment for sandboxed / terminal commands: PATH, locale, and a
// HOME + TMPDIR pinned inside `home`.
std::vector<std::string> restricted_env(const fs::path& home);

}  // namespace autoskill
