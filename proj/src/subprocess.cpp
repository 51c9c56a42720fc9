#include "autoskill/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <cstring>

#include "autoskill/errors.hpp"

namespace autoskill {

namespace {

void read_available(int fd, std::string& sink) {
    char buf[4096];
    for (;;) {
        ssize_t n = ::read(fd, buf, sizeof(buf));
        if (n > 0) {
            sink.append(buf, static_cast<size_t>(n));
            if (n < static_cast<ssize_t>(sizeof(buf))) return;
        } else {
            return;
        }
    }
}

}  // namespace

std::vector<std::string> restricted_env(const fs::path& home) {
    std::vector<std::string> env;
    const char* path = std::getenv("PATH");
    env.push_back(std::string("PATH=") + (path ? path : "/usr/local/bin:/usr/bin:/bin"));
    env.push_back("HOME=" + home.string());
    env.push_back("TMPDIR=" + home.string());
    for (const char* key : {"LANG", "LC_ALL"}) {
        if (const char* v = std::getenv(key)) env.push_back(std::string(key) + "=" + v);
    }
    return env;
}

ExecResult run_shell_command(const std::string& command, const fs::path& cwd,
                             const std::vector<std::string>& env,
                             std::chrono::milliseconds timeout) {
    int out_pipe[2];
    int err_pipe[2];
    if (::pipe(out_pipe) != 0 || ::pipe(err_pipe) != 0)
        throw Error(ErrorCode::io_failure, "pipe() failed");

    auto start = std::chrono::steady_clock::now();
    pid_t pid = ::fork();
    if (pid < 0) throw Error(ErrorCode::io_failure, "fork() failed");

    if (pid == 0) {
        // child: own process group so the timeout kill reaches grandchildren
        ::setpgid(0, 0);
        ::dup2(out_pipe[1], STDOUT_FILENO);
        ::dup2(err_pipe[1], STDERR_FILENO);
        ::close(out_pipe[0]);
        ::close(out_pipe[1]);
        ::close(err_pipe[0]);
        ::close(err_pipe[1]);
        if (::chdir(cwd.c_str()) != 0) _exit(127);
        std::vector<char*> envp;
        envp.reserve(env.size() + 1);
        for (const auto& e : env) envp.push_back(const_cast<char*>(e.c_str()));
        envp.push_back(nullptr);
        const char* argv[] = {"/bin/sh", "-c", command.c_str(), nullptr};
        ::execve("/bin/sh", const_cast<char* const*>(argv), envp.data());
        _exit(127);
    }

    ::close(out_pipe[1]);
    ::close(err_pipe[1]);
    ::fcntl(out_pipe[0], F_SETFL, O_NONBLOCK);
    ::fcntl(err_pipe[0], F_SETFL, O_NONBLOCK);

    ExecResult result;
    bool out_open = true;
    bool err_open = true;
    bool killed = false;
    auto deadline = start + timeout;

    while (true) {
        struct pollfd fds[2];
        nfds_t nfds = 0;
        if (out_open) fds[nfds++] = {out_pipe[0], POLLIN, 0};
        if (err_open) fds[nfds++] = {err_pipe[0], POLLIN, 0};

        int wait_ms = 50;
        if (!killed) {
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            if (remaining.count() <= 0) {
                ::kill(-pid, SIGKILL);
                killed = true;
                result.timed_out = true;
            } else {
                wait_ms = static_cast<int>(std::min<long long>(remaining.count(), 50));
            }
        }

        if (nfds > 0) {
            ::poll(fds, nfds, wait_ms);
            nfds_t i = 0;
            if (out_open) {
                if (fds[i].revents & (POLLIN | POLLHUP)) {
                    size_t before = result.stdout_text.size();
                    read_available(out_pipe[0], result.stdout_text);
                    if ((fds[i].revents & POLLHUP) && result.stdout_text.size() == before)
                        out_open = false;
                }
                ++i;
            }
            if (err_open) {
                if (fds[i].revents & (POLLIN | POLLHUP)) {
                    size_t before = result.stderr_text.size();
                    read_available(err_pipe[0], result.stderr_text);
                    if ((fds[i].revents & POLLHUP) && result.stderr_text.size() == before)
                        err_open = false;
                }
            }
        }

        int status = 0;
        pid_t done = ::waitpid(pid, &status, WNOHANG);
        if (done == pid) {
            // drain what the child wrote before exiting
            read_available(out_pipe[0], result.stdout_text);
            read_available(err_pipe[0], result.stderr_text);
            ::close(out_pipe[0]);
            ::close(err_pipe[0]);
            if (WIFEXITED(status)) {
                result.exit_code = WEXITSTATUS(status);
            } else if (WIFSIGNALED(status)) {
                result.exit_code = 128 + WTERMSIG(status);
            }
            break;
        }
        if (killed && !out_open && !err_open) {
            // reap without pipes; the kill already landed
            ::waitpid(pid, &status, 0);
            ::close(out_pipe[0]);
            ::close(err_pipe[0]);
            result.exit_code = 128 + SIGKILL;
            break;
        }
    }

    result.duration_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (result.timed_out && result.duration_seconds < std::chrono::duration<double>(timeout).count())
        result.duration_seconds = std::chrono::duration<double>(timeout).count();
    return result;
}

}  // namespace autoskill
