#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "loom/clock.hpp"
#include "loom/link.hpp"
#include "loom/store.hpp"
#include "loom/wiring.hpp"

namespace loom {

// Per-task run configuration. The wiring declares the shape; this supplies
// the program, version, and policy knobs for one run.
struct TaskConfig {
    std::vector<std::string> exec; // argv prefix; inputs/outputs appended
    std::string code_version = "v0";
    SnapshotPolicy policy;
    TimestampMs min_execution_interval_ms = 0;
    double service_time_ms = 0.0; // estimate for channel selection
};

// How an implicit (out-of-band) dependency is satisfied: either a static
// fixture file, or a program invoked as `argv... <request-file> <response-file>`.
// The request body comes from the named input slot's current value, or is
// empty when no slot is designated.
struct ImplicitAdapter {
    std::string fixture;
    std::vector<std::string> argv;
    std::string request_slot;

    bool valid() const { return !fixture.empty() || !argv.empty(); }
};

// Everything a result cache key may depend on. Payload URIs, not value ids:
// identical bytes arriving through different events should still hit.
struct CacheKeyParts {
    std::string task;
    std::string code_version;
    std::vector<std::vector<std::string>> slot_uris; // per slot, buffer order
    std::vector<std::string> implicit_digests;       // implicit slot decl order
};

std::string cache_key(const CacheKeyParts& parts);

// The ledger entry for one execution attempt, cached or real.
struct ExecutionRecord {
    std::string task;
    int64_t exec_n = 0; // per-task ordinal, from 1
    std::string snapshot_key;
    std::string cache_key;
    std::vector<std::vector<std::string>> input_ids; // per slot
    std::vector<std::pair<std::string, std::string>> implicit_digests; // (wire, digest)
    std::vector<std::pair<std::string, std::string>> outputs;          // (wire, av id)
    std::optional<int> exit_status; // absent when cached or ghost
    TimestampMs started = 0;
    TimestampMs finished = 0;
    std::string code_version;
    bool cached = false;
    bool ghost = false;
    std::string stderr_text;
};

// Successful results by cache key. A hit is only honoured while every output
// payload is still resident in the store; replays re-mint values so the
// trace can tell "recomputed" from "served from cache".
class ExecutionCache {
public:
    struct Entry {
        std::vector<std::string> output_uris; // output decl order
    };

    std::optional<Entry> lookup(const std::string& key, const ContentStore& store) const;
    void insert(const std::string& key, Entry entry);
    size_t size() const { return entries_.size(); }

private:
    std::map<std::string, Entry> entries_;
};

// Write snapshot payloads into workdir as labelled files, one per value,
// named `<slot>.<ordinal>.<av-id>`, in slot declaration order then buffer
// order. A ghost snapshot yields no files. Throws NotFoundError when a
// payload is no longer resolvable.
std::vector<std::filesystem::path> materialize(const Snapshot& snapshot,
                                               const std::vector<InputSlot>& slots,
                                               const ContentStore& store,
                                               const std::filesystem::path& workdir);

struct ProcessResult {
    int exit_code = -1;
    std::string stderr_text;
};

// Run a program to completion with stderr captured. `env` entries are added
// to the child's environment. Throws ServiceError if the program cannot be
// spawned at all.
ProcessResult run_process(const std::vector<std::string>& argv,
                          const std::filesystem::path& cwd,
                          const std::vector<std::pair<std::string, std::string>>& env);

struct ImplicitOutcome {
    std::string uri;    // response payload in the content store
    std::string digest; // hex digest (the uri's hash part)
};

// Consult one out-of-band dependency and freeze its response into the store
// so later traces can show exactly what was seen. Throws ServiceError when
// the adapter is missing, fails, or produces no response.
ImplicitOutcome resolve_implicit(const ImplicitAdapter& adapter,
                                 const std::string& request, ContentStore& store,
                                 const std::filesystem::path& scratch);

// Environment variable names provided to plugin processes.
inline constexpr const char* kEnvSnapshotKey = "LOOM_SNAPSHOT_KEY";
inline constexpr const char* kEnvInputCount = "LOOM_INPUT_COUNT";
inline constexpr const char* kEnvOutputCount = "LOOM_OUTPUT_COUNT";

} // namespace loom
