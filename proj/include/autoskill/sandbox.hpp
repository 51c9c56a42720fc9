#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "autoskill/constants.hpp"
#include "autoskill/subprocess.hpp"
#include "autoskill/util.hpp"

namespace autoskill {

// Isolated execution root presented to commands as their working directory,
// with inputs/ and outputs/ underneath. The local backend isolates by
// per-sandbox temporary directory, scrubbed environment, and working-directory
// confinement only; it is NOT a kernel-level boundary. Container backends
// plug in through SandboxFactory.
class Sandbox {
public:
    virtual ~Sandbox() = default;

    virtual const std::string& id() const = 0;
    virtual const fs::path& root() const = 0;
    virtual bool is_open() const = 0;

    // Executes through the platform shell, cwd = sandbox root, allowlisted
    // environment. Killed at `timeout` (+5 s grace), timed_out set.
    virtual ExecResult run(const std::string& command,
                           std::chrono::seconds timeout =
                               std::chrono::seconds(constants::kExecCodeTimeoutSeconds)) = 0;

    // dest_rel resolves under the sandbox root; "" or a bare filename lands
    // under inputs/. Rejects any path that escapes the root (PathEscape).
    virtual void upload(const fs::path& host_file, const std::string& dest_rel = "") = 0;

    // Returns the file's bytes verbatim. PathEscape / NotFound.
    virtual std::string download(const std::string& src_rel) = 0;

    // Destroys the root. Idempotent; every other operation on a closed
    // sandbox throws SandboxClosed.
    virtual void close() = 0;
};

class SandboxFactory {
public:
    virtual ~SandboxFactory() = default;
    virtual std::shared_ptr<Sandbox> create() = 0;
};

class LocalSandboxFactory : public SandboxFactory {
public:
    // base_dir defaults to the system temp directory.
    explicit LocalSandboxFactory(fs::path base_dir = {}, IdSource ids = random_id_source());
    std::shared_ptr<Sandbox> create() override;

private:
    fs::path base_dir_;
    IdSource ids_;
};

// Resolves `rel` against `root`, rejecting absolute paths and any traversal
// that would leave the root. Shared by sandbox and patch containment checks.
fs::path contain_path(const fs::path& root, const std::string& rel);

// Tracks open sandboxes for the agent loop; close_all runs at session end.
class SandboxManager {
public:
    explicit SandboxManager(std::shared_ptr<SandboxFactory> factory)
        : factory_(std::move(factory)) {}

    std::shared_ptr<Sandbox> create();
    std::shared_ptr<Sandbox> get(const std::string& id) const;  // NotFound
    void close_all();

private:
    std::shared_ptr<SandboxFactory> factory_;
    mutable std::mutex mu_;
    std::vector<std::shared_ptr<Sandbox>> sandboxes_;
};

}  // namespace autoskill
