#pragma once

#include <deque>
#include <iosfwd>
#include <map>
#include <optional>
#include <queue>
#include <set>
#include <string>
#include <vector>

#include "loom/clock.hpp"
#include "loom/config.hpp"
#include "loom/ids.hpp"
#include "loom/link.hpp"
#include "loom/provenance.hpp"
#include "loom/store.hpp"
#include "loom/task.hpp"
#include "loom/wiring.hpp"

namespace loom {

// One scripted arrival: wait `delay_ms` after the previous event, then drop
// the payload file's bytes onto `wire`.
struct SourceEvent {
    std::string wire;
    TimestampMs delay_ms = 0;
    std::string payload_path;
};

// Event feed file: one `<wire> <delay-ms> <payload-path>` row per line,
// `#` comments and blank lines ignored.
std::vector<SourceEvent> parse_event_file(const std::filesystem::path& file);

// One hop in the routing table: lineage labels are id-free, so ghost and
// real runs over the same schedule yield comparable rows.
struct RoutingRow {
    std::string lineage;
    std::string wire;
    std::string consumer;

    auto operator<=>(const RoutingRow&) const = default;
};

enum class TriggerKind { SampleUpdate, SoftwareUpdate, ServiceUpdate };

const char* to_string(TriggerKind k);
std::optional<TriggerKind> trigger_kind_from_string(const std::string& s);

struct UpdateTrigger {
    TriggerKind kind = TriggerKind::SampleUpdate;
    std::string subject;     // task (software) or wire (sample/service)
    std::string new_version; // software_update only
    std::string payload;     // sample_update only: injected bytes
};

struct InvalidationReport {
    TriggerKind kind = TriggerKind::SampleUpdate;
    std::string subject;
    std::vector<std::string> stale; // forward-reachable tasks, sorted
    std::string injected_av;        // sample_update only
};

struct TerminalValue {
    std::string wire;
    std::string av;
    std::string uri;
};

// Everything one run produced, serializable as one JSON record per line in
// a stable order so runs can be diffed.
struct RunReport {
    std::string mode; // reactive | pull | ghost
    uint64_t seed = 0;
    int64_t source_events = 0;
    std::vector<ExecutionRecord> executions;
    std::map<std::string, int64_t> snapshots;  // per task
    std::map<std::string, bool> push_channel;  // per task: notify vs poll
    std::vector<RoutingRow> routing;
    std::map<std::string, int64_t> cycle_suppressed; // per task
    std::vector<TerminalValue> terminal;

    // Real external program invocations (cache hits and ghosts excluded).
    int64_t invocations() const;
    void write_jsonl(std::ostream& os) const;
};

struct StopCondition {
    std::optional<TimestampMs> deadline_ms;   // absolute clock bound
    std::optional<int64_t> max_source_events; // truncate the feed
};

// The run orchestrator: owns the clock, the id generator, link states and
// task runtimes, and drives reactive (push), pull (make-style), and ghost
// propagation over one wiring. State persists across calls, so triggers and
// repeated runs compose; only the report is per-call.
class Engine {
public:
    Engine(const PipelineSpec& spec, RunSettings settings, ContentStore& store,
           Registry& registry, bool ghost = false);

    RunReport run_reactive(std::vector<SourceEvent> events, StopCondition stop = {});
    RunReport run_pull(const std::string& target);
    InvalidationReport apply_trigger(const UpdateTrigger& trigger);

    // Rebuild value metadata, latest-per-wire state, and the result cache
    // from the registry's events (call before load_state when resuming).
    void adopt_registry_values();

    void save_state(const std::filesystem::path& file) const;
    void load_state(const std::filesystem::path& file);

    const AvRegistry& values() const { return avs_; }
    Clock& clock() { return clock_; }
    const PipelineSpec& spec() const { return spec_; }
    const RunSettings& settings() const { return settings_; }

private:
    struct TaskState {
        const TaskDecl* decl = nullptr;
        TaskConfig config;
        LinkState link;
        int64_t exec_n = 0;
        std::optional<TimestampMs> last_invocation; // real invocations only
        std::deque<Snapshot> pending;               // admitted, not yet run
        bool in_cycle = false;
        std::map<int64_t, int> per_origin_execs;    // cycle budget ledger
        int64_t suppressed = 0;
    };

    struct Action {
        TimestampMs at = 0;
        int64_t seq = 0;
        enum class Type { Ingest, TryExec } type = Type::Ingest;
        size_t event_index = 0; // Ingest
        std::string task;       // TryExec
        bool operator>(const Action& o) const {
            return std::tie(at, seq) > std::tie(o.at, o.seq);
        }
    };

    // One admitted snapshot, staged for execution. Preparation (implicit
    // lookups, cache check, materialization, provenance exec_start) and
    // finalization (mints, cache insert, delivery) run on the manager
    // thread; only the external process invocation between them may
    // parallelize across distinct tasks.
    struct PreparedExec {
        enum class Kind { Ghost, CacheHit, Invoke, Deferred };
        Kind kind = Kind::Deferred;
        TaskState* ts = nullptr;
        Snapshot snap;
        int64_t exec_n = 0;
        int64_t origin = 0;
        std::string cache_key;
        std::vector<std::pair<std::string, std::string>> implicit_digests;
        std::vector<std::vector<std::string>> input_ids;
        ExecutionCache::Entry hit;              // CacheHit
        std::vector<std::string> argv;          // Invoke
        std::vector<std::pair<std::string, std::string>> env;
        std::filesystem::path workdir;
        std::vector<std::filesystem::path> out_paths;
        TimestampMs started = 0;
        TimestampMs retry_at = 0;               // Deferred
    };

    void schedule(Action a);
    void ingest_event(const SourceEvent& ev);
    AnnotatedValue ingest_value(const std::string& wire, const std::string& payload,
                                bool ghost);
    void deliver(const AnnotatedValue& av);
    void admit_snapshots(const std::string& task);
    void process_pending(const std::string& task, bool rate_control);
    PreparedExec prepare_exec(TaskState& ts, bool rate_control);
    void finalize_exec(PreparedExec& prep, const ProcessResult* pr);
    std::vector<AnnotatedValue> mint_outputs(TaskState& ts, int64_t exec_n,
                                             const std::vector<std::string>& uris,
                                             bool ghost, int64_t origin);
    int64_t snapshot_origin(const Snapshot& snap) const;
    void drain_queue(const StopCondition& stop);
    void finish_report(RunReport& report);
    void compute_cycle_membership();
    std::set<std::string> forward_tasks(const std::set<std::string>& seeds) const;

    // Pull internals.
    std::optional<Snapshot> build_pull_snapshot(TaskState& ts);
    void pull_task_once(TaskState& ts);

    PipelineSpec spec_;
    RunSettings settings_;
    ContentStore* store_;
    Registry* registry_;
    bool ghost_;
    // Pull runs hand values downstream through latest-per-wire state, not
    // through link queues; deliver() is reactive-only.
    bool pull_mode_ = false;

    Clock clock_;
    IdGen ids_;
    AvRegistry avs_;
    ExecutionCache cache_;

    std::map<std::string, TaskState> tasks_;
    // wire -> (consumer task, slot index) for stream slots
    std::map<std::string, std::vector<std::pair<std::string, int>>> consumers_;
    // wire -> producer task (stream or implicit output)
    std::map<std::string, std::string> producer_;
    std::map<std::string, int64_t> source_ordinals_;
    int64_t ingest_counter_ = 0;
    std::map<std::string, std::vector<AnnotatedValue>> latest_on_wire_;

    std::priority_queue<Action, std::vector<Action>, std::greater<Action>> queue_;
    std::vector<SourceEvent> events_; // feed for the run in progress
    int64_t action_seq_ = 0;
    RunReport report_;
    std::filesystem::path scratch_;
};

} // namespace loom
