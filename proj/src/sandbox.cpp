#include "autoskill/sandbox.hpp"

#include <algorithm>

#include "autoskill/errors.hpp"

namespace autoskill {

fs::path contain_path(const fs::path& root, const std::string& rel) {
    fs::path p(rel);
    if (p.is_absolute())
        throw Error(ErrorCode::path_escape, "absolute path not allowed: " + rel);
    fs::path normal = (root / p).lexically_normal();
    fs::path base = root.lexically_normal();
    auto base_it = base.begin();
    auto norm_it = normal.begin();
    for (; base_it != base.end(); ++base_it, ++norm_it) {
        if (norm_it == normal.end() || *norm_it != *base_it)
            throw Error(ErrorCode::path_escape, "path escapes sandbox root: " + rel);
    }
    if (norm_it == normal.end())
        throw Error(ErrorCode::path_escape, "path resolves to the root itself: " + rel);
    return normal;
}

namespace {

class LocalSandbox : public Sandbox {
public:
    LocalSandbox(std::string id, fs::path root) : id_(std::move(id)), root_(std::move(root)) {
        fs::create_directories(root_ / "inputs");
        fs::create_directories(root_ / "outputs");
    }

    ~LocalSandbox() override {
        try {
            close();
        } catch (...) {
        }
    }

    const std::string& id() const override { return id_; }
    const fs::path& root() const override { return root_; }
    bool is_open() const override {
        std::lock_guard<std::mutex> lock(mu_);
        return open_;
    }

    ExecResult run(const std::string& command, std::chrono::seconds timeout) override {
        std::lock_guard<std::mutex> lock(mu_);
        ensure_open();
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(timeout);
        return run_shell_command(command, root_, restricted_env(root_), ms);
    }

    void upload(const fs::path& host_file, const std::string& dest_rel) override {
        std::lock_guard<std::mutex> lock(mu_);
        ensure_open();
        if (!fs::is_regular_file(host_file))
            throw Error(ErrorCode::not_found, "host file missing: " + host_file.string());
        std::string rel = dest_rel;
        if (rel.empty()) rel = "inputs/" + host_file.filename().string();
        else if (rel.find('/') == std::string::npos) rel = "inputs/" + rel;
        fs::path dest = contain_path(root_, rel);
        fs::create_directories(dest.parent_path());
        fs::copy_file(host_file, dest, fs::copy_options::overwrite_existing);
    }

    std::string download(const std::string& src_rel) override {
        std::lock_guard<std::mutex> lock(mu_);
        ensure_open();
        fs::path src = contain_path(root_, src_rel);
        if (!fs::is_regular_file(src))
            throw Error(ErrorCode::not_found, "no such file in sandbox: " + src_rel);
        return read_file(src);
    }

    void close() override {
        std::lock_guard<std::mutex> lock(mu_);
        if (!open_) return;
        open_ = false;
        std::error_code ec;
        fs::remove_all(root_, ec);
    }

private:
    void ensure_open() const {
        if (!open_) throw Error(ErrorCode::sandbox_closed, "sandbox " + id_ + " is closed");
    }

    std::string id_;
    fs::path root_;
    bool open_ = true;
    mutable std::mutex mu_;
};

}  // namespace

LocalSandboxFactory::LocalSandboxFactory(fs::path base_dir, IdSource ids)
    : base_dir_(std::move(base_dir)), ids_(std::move(ids)) {
    if (base_dir_.empty()) base_dir_ = fs::temp_directory_path();
}

std::shared_ptr<Sandbox> LocalSandboxFactory::create() {
    if (!fs::exists("/bin/sh"))
        throw Error(ErrorCode::backend_unavailable, "local backend needs /bin/sh");
    std::error_code ec;
    fs::create_directories(base_dir_, ec);
    if (ec)
        throw Error(ErrorCode::backend_unavailable,
                    "cannot create sandbox base dir " + base_dir_.string());
    std::string id = ids_();
    fs::path root = base_dir_ / ("sandbox-" + id);
    return std::make_shared<LocalSandbox>(id, root);
}

std::shared_ptr<Sandbox> SandboxManager::create() {
    auto sandbox = factory_->create();
    std::lock_guard<std::mutex> lock(mu_);
    sandboxes_.push_back(sandbox);
    return sandbox;
}

std::shared_ptr<Sandbox> SandboxManager::get(const std::string& id) const {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& s : sandboxes_) {
        if (s->id() == id) return s;
    }
    throw Error(ErrorCode::not_found, "no sandbox with id " + id);
}

void SandboxManager::close_all() {
    std::lock_guard<std::mutex> lock(mu_);
    for (const auto& s : sandboxes_) s->close();
    sandboxes_.clear();
}

}  // namespace autoskill
