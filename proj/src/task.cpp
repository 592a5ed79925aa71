#include "loom/task.hpp"

#include <cerrno>
#include <cstring>
#include <fstream>
#include <sstream>

#include <fcntl.h>
#include <sys/wait.h>
#include <unistd.h>

#include "loom/digest.hpp"
#include "loom/error.hpp"

namespace loom {

namespace fs = std::filesystem;

std::string cache_key(const CacheKeyParts& parts) {
    std::vector<std::string> fields;
    fields.push_back("task:" + parts.task);
    fields.push_back("version:" + parts.code_version);
    for (size_t i = 0; i < parts.slot_uris.size(); ++i) {
        fields.push_back("slot:" + std::to_string(i));
        for (const auto& uri : parts.slot_uris[i]) fields.push_back(uri);
    }
    fields.push_back("implicit");
    for (const auto& d : parts.implicit_digests) fields.push_back(d);
    return sha256_fields(fields);
}

std::optional<ExecutionCache::Entry> ExecutionCache::lookup(
    const std::string& key, const ContentStore& store) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    for (const auto& uri : it->second.output_uris)
        if (!store.contains(uri)) return std::nullopt; // payload evicted
    return it->second;
}

void ExecutionCache::insert(const std::string& key, Entry entry) {
    entries_[key] = std::move(entry);
}

std::vector<fs::path> materialize(const Snapshot& snapshot,
                                  const std::vector<InputSlot>& slots,
                                  const ContentStore& store, const fs::path& workdir) {
    std::vector<fs::path> out;
    if (snapshot.ghost()) return out;
    fs::create_directories(workdir);
    for (size_t i = 0; i < slots.size(); ++i) {
        if (slots[i].implicit) continue;
        const auto& buf = snapshot.slots.at(i);
        for (size_t j = 0; j < buf.size(); ++j) {
            const AnnotatedValue& av = buf[j];
            std::string bytes = store.fetch(av);
            fs::path p = workdir / (slots[i].wire + "." + std::to_string(j) + "." + av.id);
            std::ofstream f(p, std::ios::binary | std::ios::trunc);
            if (!f) throw Error("materialize: cannot write " + p.string());
            f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
            f.close();
            out.push_back(std::move(p));
        }
    }
    return out;
}

ProcessResult run_process(const std::vector<std::string>& argv, const fs::path& cwd,
                          const std::vector<std::pair<std::string, std::string>>& env) {
    if (argv.empty()) throw ServiceError("run_process: empty argv");

    int err_pipe[2];
    if (pipe(err_pipe) != 0)
        throw ServiceError(std::string("run_process: pipe: ") + std::strerror(errno));

    pid_t pid = fork();
    if (pid < 0) {
        close(err_pipe[0]);
        close(err_pipe[1]);
        throw ServiceError(std::string("run_process: fork: ") + std::strerror(errno));
    }

    if (pid == 0) {
        // Child: route stderr into the pipe, quiet stdout, run the program.
        close(err_pipe[0]);
        dup2(err_pipe[1], STDERR_FILENO);
        close(err_pipe[1]);
        int devnull = open("/dev/null", O_WRONLY);
        if (devnull >= 0) {
            dup2(devnull, STDOUT_FILENO);
            close(devnull);
        }
        if (!cwd.empty() && chdir(cwd.c_str()) != 0) _exit(126);
        for (const auto& [k, v] : env) setenv(k.c_str(), v.c_str(), 1);
        std::vector<char*> cargv;
        cargv.reserve(argv.size() + 1);
        for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
        cargv.push_back(nullptr);
        execvp(cargv[0], cargv.data());
        // exec failed: report on the captured stderr and use the shell's
        // conventional not-found status.
        std::string msg = "exec failed: " + argv[0] + ": " + std::strerror(errno) + "\n";
        ssize_t ignored = write(STDERR_FILENO, msg.data(), msg.size());
        (void)ignored;
        _exit(errno == ENOENT ? 127 : 126);
    }

    close(err_pipe[1]);
    std::string captured;
    char buf[4096];
    ssize_t n;
    while ((n = read(err_pipe[0], buf, sizeof(buf))) > 0)
        captured.append(buf, static_cast<size_t>(n));
    close(err_pipe[0]);

    int status = 0;
    if (waitpid(pid, &status, 0) < 0)
        throw ServiceError(std::string("run_process: waitpid: ") + std::strerror(errno));

    ProcessResult result;
    result.stderr_text = std::move(captured);
    if (WIFEXITED(status))
        result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status))
        result.exit_code = 128 + WTERMSIG(status);
    else
        result.exit_code = -1;
    return result;
}

ImplicitOutcome resolve_implicit(const ImplicitAdapter& adapter,
                                 const std::string& request, ContentStore& store,
                                 const fs::path& scratch) {
    if (!adapter.valid())
        throw ServiceError("implicit dependency has no adapter registered");

    std::string response;
    if (!adapter.fixture.empty()) {
        std::ifstream f(adapter.fixture, std::ios::binary);
        if (!f)
            throw ServiceError("implicit fixture not readable: " + adapter.fixture);
        std::ostringstream ss;
        ss << f.rdbuf();
        response = ss.str();
    } else {
        fs::create_directories(scratch);
        fs::path req = scratch / "request";
        fs::path resp = scratch / "response";
        {
            std::ofstream f(req, std::ios::binary | std::ios::trunc);
            f.write(request.data(), static_cast<std::streamsize>(request.size()));
        }
        std::error_code ec;
        fs::remove(resp, ec);
        std::vector<std::string> argv = adapter.argv;
        argv.push_back(req.string());
        argv.push_back(resp.string());
        ProcessResult pr = run_process(argv, scratch, {});
        if (pr.exit_code != 0)
            throw ServiceError("implicit adapter '" + adapter.argv[0] + "' exited " +
                               std::to_string(pr.exit_code) +
                               (pr.stderr_text.empty() ? "" : ": " + pr.stderr_text));
        std::ifstream f(resp, std::ios::binary);
        if (!f)
            throw ServiceError("implicit adapter '" + adapter.argv[0] +
                               "' wrote no response file");
        std::ostringstream ss;
        ss << f.rdbuf();
        response = ss.str();
    }

    ImplicitOutcome out;
    out.uri = store.put(response, EvictionClass::Source);
    out.digest = out.uri.substr(out.uri.find(':') + 1);
    return out;
}

} // namespace loom
