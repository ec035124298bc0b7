#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

#include <nlohmann/json.hpp>

#include "troika/agents.hpp"
#include "troika/errors.hpp"
#include "troika/fsio.hpp"

namespace fs = std::filesystem;

namespace troika {

using nlohmann::json;

ProcessBackendConfig ProcessBackendConfig::from_file(const fs::path& path) {
    json j;
    try {
        j = json::parse(fsio::read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError(std::string("process backend config is not valid JSON: ") + e.what());
    }
    ProcessBackendConfig cfg;
    try {
        cfg.fresh_argv = j.at("fresh_argv").get<std::vector<std::string>>();
        if (j.contains("resume_argv"))
            cfg.resume_argv = j["resume_argv"].get<std::vector<std::string>>();
        if (j.contains("grace_seconds")) cfg.grace_seconds = j["grace_seconds"].get<double>();
        if (j.contains("prompt_dir")) cfg.prompt_dir = j["prompt_dir"].get<std::string>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad process backend config shape: ") + e.what());
    }
    if (cfg.fresh_argv.empty()) throw ConfigError("process backend needs a non-empty fresh_argv");
    return cfg;
}

namespace {

class ProcessBackend final : public Backend {
public:
    explicit ProcessBackend(ProcessBackendConfig cfg) : cfg_(std::move(cfg)) {
        if (cfg_.resume_argv.empty()) cfg_.resume_argv = cfg_.fresh_argv;
        if (cfg_.prompt_dir.empty()) cfg_.prompt_dir = fs::temp_directory_path() / "troika-prompts";
    }

    AgentResponse dispatch(const AgentRequest& request) override;
    const char* kind() const override { return "process"; }

private:
    ProcessBackendConfig cfg_;
    int seq_ = 0;
};

double now_seconds() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

AgentResponse ProcessBackend::dispatch(const AgentRequest& request) {
    seq_ += 1;
    fs::create_directories(cfg_.prompt_dir);
    char stem[64];
    std::snprintf(stem, sizeof(stem), "%04d-%s.md", seq_, request.session.name.c_str());
    fs::path prompt_file = cfg_.prompt_dir / stem;
    fsio::atomic_write(prompt_file, request.injected_state + "\n\n" + request.instruction + "\n");

    const std::map<std::string, std::string> values{
        {"session_name", request.session.name},
        {"prompt_file", prompt_file.string()},
        {"role", role_label(request.role)},
        {"purpose", purpose_label(request.purpose)},
    };
    const auto& tmpl =
        request.session.mode == SessionMode::Fresh ? cfg_.fresh_argv : cfg_.resume_argv;
    std::vector<std::string> argv_owned;
    argv_owned.reserve(tmpl.size());
    for (const std::string& a : tmpl) argv_owned.push_back(expand_placeholders(a, values));
    std::vector<char*> argv;
    for (std::string& a : argv_owned) argv.push_back(a.data());
    argv.push_back(nullptr);

    int out_pipe[2];
    int err_pipe[2]; // close-on-exec channel that reports exec failure
    if (pipe(out_pipe) != 0 || pipe(err_pipe) != 0)
        throw SpawnError("pipe: " + std::string(std::strerror(errno)));
    fcntl(err_pipe[1], F_SETFD, FD_CLOEXEC);

    pid_t pid = fork();
    if (pid < 0) throw SpawnError("fork: " + std::string(std::strerror(errno)));
    if (pid == 0) {
        dup2(out_pipe[1], STDOUT_FILENO);
        close(out_pipe[0]);
        close(out_pipe[1]);
        close(err_pipe[0]);
        execvp(argv[0], argv.data());
        int err = errno;
        (void)!write(err_pipe[1], &err, sizeof(err));
        _exit(127);
    }
    close(out_pipe[1]);
    close(err_pipe[1]);

    int exec_errno = 0;
    if (read(err_pipe[0], &exec_errno, sizeof(exec_errno)) == sizeof(exec_errno)) {
        close(err_pipe[0]);
        close(out_pipe[0]);
        waitpid(pid, nullptr, 0);
        throw SpawnError(argv_owned[0] + ": " + std::strerror(exec_errno));
    }
    close(err_pipe[0]);

    const double start = now_seconds();
    const double budget = request.budget_seconds > 0 ? request.budget_seconds : 1.0;
    bool timed_out = false;
    bool killed = false;
    std::string output;
    char buf[4096];
    pollfd pfd{out_pipe[0], POLLIN, 0};
    for (;;) {
        double elapsed = now_seconds() - start;
        double deadline = timed_out ? budget + cfg_.grace_seconds : budget;
        if (elapsed >= deadline) {
            if (!timed_out) {
                timed_out = true;
                kill(pid, SIGTERM);
                continue;
            }
            if (!killed) {
                killed = true;
                kill(pid, SIGKILL);
            } else if (elapsed >= deadline + 10.0) {
                break; // a grandchild is holding the pipe open; stop waiting
            }
        }
        int wait_ms = killed ? 100 : static_cast<int>((deadline - elapsed) * 1000) + 1;
        if (wait_ms < 1) wait_ms = 1;
        if (wait_ms > 200) wait_ms = 200;
        int r = poll(&pfd, 1, wait_ms);
        if (r > 0) {
            ssize_t n = read(out_pipe[0], buf, sizeof(buf));
            if (n > 0) {
                output.append(buf, static_cast<size_t>(n));
                continue;
            }
            break; // EOF or read error: the child closed its stdout
        }
        if (r < 0 && errno != EINTR) break;
    }
    close(out_pipe[0]);
    waitpid(pid, nullptr, 0);

    AgentResponse resp;
    resp.text = std::move(output);
    resp.wall_seconds = now_seconds() - start;
    resp.timed_out = timed_out;
    return resp;
}

} // namespace

std::unique_ptr<Backend> make_process_backend(ProcessBackendConfig config) {
    return std::make_unique<ProcessBackend>(std::move(config));
}

} // namespace troika
