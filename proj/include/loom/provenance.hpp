#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "loom/clock.hpp"

namespace loom {

// The closed set of causal event kinds. Everything the engine does lands in
// the registry as one of these; every trace view is derived from them.
enum class EventKind {
    Ingest,         // value entered on a source wire
    Enqueue,        // value offered to a consumer's slot queue
    Assemble,       // link agent folded queued values into a snapshot
    ExecStart,      // user code invocation began
    ExecEnd,        // user code invocation finished
    CacheHit,       // execution short-circuited by the result cache
    ImplicitLookup, // out-of-band dependency consulted
    Mint,           // output value annotated and released
    Evict,          // store dropped a payload
    Trigger,        // external change notice applied
};

const char* to_string(EventKind k);
std::optional<EventKind> event_kind_from_string(const std::string& s);

struct ProvenanceEvent {
    int64_t seq = 0; // assigned by the registry, dense from 1
    TimestampMs at = 0;
    EventKind kind = EventKind::Ingest;
    std::string task;                 // empty when not task-scoped
    std::string wire;                 // empty when not wire-scoped
    std::string av;                   // subject value id, if any
    std::vector<std::string> inputs;  // consumed value ids
    std::vector<std::string> outputs; // produced value ids
    std::string key;                  // snapshot key / cache key / digest
    nlohmann::ordered_json extra;     // kind-specific small fields

    nlohmann::ordered_json to_json() const;
    static ProvenanceEvent from_json(const nlohmann::ordered_json& j);
};

// Deduplicated invariant relation between pipeline entities.
struct ConceptEdge {
    std::string from;
    std::string to;
    std::string relation; // "precedes" | "may_determine"

    auto operator<=>(const ConceptEdge&) const = default;
};

// Append-only event log, one JSON object per line, with a version header
// record. All trace views (traveller, checkpoint, concept map) are derived
// from the event sequence and never stored separately, so replaying the
// file reproduces them byte for byte.
class Registry {
public:
    // In-memory only (no file backing).
    Registry() = default;
    // File-backed: loads any existing events, then appends.
    explicit Registry(const std::filesystem::path& file);

    int64_t append(ProvenanceEvent ev);
    const std::vector<ProvenanceEvent>& events() const { return events_; }
    size_t count() const { return events_.size(); }
    const std::filesystem::path& path() const { return path_; }

    // Per-artifact causal history: the value's hops backward to ingress.
    // Throws NotFoundError for an unknown id.
    std::string traveller(const std::string& av_id) const;

    // Per-task chronological visitor log, two-level (major, minor) subtime
    // numbering: each execution opens a major step, annotations within it
    // take minor steps at increasing indent. Throws NotFoundError when the
    // task never appears in the log.
    std::string checkpoint(const std::string& task_name) const;

    // Invariant relation graph over the whole log, deduplicated by
    // (from, to, relation).
    std::vector<ConceptEdge> concept_edges() const;
    std::string concept_map() const;

    // Flat filter over events. Supported fields: kind, task, wire, key,
    // av (av follows the traveller's backward closure, not a flat match).
    // Throws ConfigError for an unknown field.
    std::vector<const ProvenanceEvent*> query(const std::string& field,
                                              const std::string& value) const;

    // The backward causal closure of one value: every event the traveller
    // walk touches, in seq order.
    std::vector<const ProvenanceEvent*> causal_closure(const std::string& av_id) const;

private:
    void load();
    void write_line(const nlohmann::ordered_json& j);

    std::filesystem::path path_;
    std::ofstream out_;
    std::vector<ProvenanceEvent> events_;
    int64_t next_seq_ = 1;
};

} // namespace loom
