#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "loom/clock.hpp"
#include "loom/ids.hpp"

namespace loom {

// A provenance-carrying reference to a payload — never the payload itself.
// Ghost values are the payload-free variant used for wireframe runs.
struct AnnotatedValue {
    std::string id;              // 128-bit random, unique per run registry
    std::string source_task;     // empty for ingested source values
    std::string wire;
    std::string payload_ref;     // cas: URI; empty iff ghost
    TimestampMs created_wall = 0;
    int64_t created_logical = 0; // per (source_task, wire), strictly increasing
    std::string code_version;
    bool ghost = false;
    // Engine bookkeeping, persisted with the value's registry record:
    int64_t origin = 0;          // registry seq of the originating ingest
    std::string lineage;         // id-free pedigree label, stable across replays
};

enum class EvictionClass { Source, IntermediateCombined, IntermediateSimple };

const char* to_string(EvictionClass c);
std::optional<EvictionClass> eviction_class_from_string(const std::string& s);

struct ContentEntry {
    std::string uri; // "cas:<hex sha256>"
    uint64_t size = 0;
    TimestampMs stored_at = 0;
    EvictionClass eviction_class = EvictionClass::IntermediateSimple;
    bool pinned = false;
};

// Cache lifetimes per eviction class. Intermediate results combined with
// others are kept longer than simple pass-through intermediates, because a
// partial recomputation is likelier to want them. ttl <= 0 means "keep".
struct StorePolicy {
    uint64_t max_bytes = 1ull << 30;
    int64_t ttl_source_ms = 0;
    int64_t ttl_combined_ms = 0;
    int64_t ttl_simple_ms = 0;
    // Ratio of internal-storage latency to network-storage latency. Recorded
    // and reported as a placement knob; drives no automatic decision.
    double rho = 1.0;

    int64_t ttl_for(EvictionClass c) const {
        switch (c) {
            case EvictionClass::Source: return ttl_source_ms;
            case EvictionClass::IntermediateCombined: return ttl_combined_ms;
            case EvictionClass::IntermediateSimple: return ttl_simple_ms;
        }
        return 0;
    }
};

// Content-addressed payload store over a filesystem directory. Identical
// bytes always map to the identical cas: URI, so the URI doubles as an
// equality witness in cache keys. Blobs fan out two hex levels deep
// (ab/cdef...); an append-only index carries cache metadata so a reopened
// store remembers classes, pins, and ages.
class ContentStore {
public:
    using EvictHook = std::function<void(const std::string& uri)>;

    ContentStore(std::filesystem::path root, StorePolicy policy, const Clock* clock);

    // Idempotent for identical bytes. Runs an eviction pass when a new blob
    // would exceed capacity; throws CapacityError if that pass cannot free
    // enough space.
    std::string put(std::span<const std::byte> payload, EvictionClass cls);
    std::string put(const std::string& payload, EvictionClass cls);

    // Throws NotFoundError if evicted or never stored.
    std::string get(const std::string& uri) const;
    bool contains(const std::string& uri) const;

    // Payload of an annotated value; throws GhostError for ghosts, which is
    // still a not-found but distinguishable by type.
    std::string fetch(const AnnotatedValue& av) const;

    void pin(const std::string& uri, bool pinned = true);

    // Removes unpinned entries whose class TTL has elapsed, oldest first,
    // then keeps evicting (oldest first; at equal age the cheaper-to-recompute
    // class goes first) until within capacity.
    std::vector<std::string> evict(TimestampMs now);

    void set_evict_hook(EvictHook hook) { evict_hook_ = std::move(hook); }

    // The pipeline manager re-seats this so blob ages follow run time
    // (simulated or wall) rather than whatever clock built the store.
    void set_clock(const Clock* clock) { clock_ = clock; }

    uint64_t total_bytes() const;
    size_t entry_count() const;
    std::optional<ContentEntry> entry(const std::string& uri) const;
    const StorePolicy& policy() const { return policy_; }
    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path blob_path(const std::string& hex) const;
    void append_index(const std::string& op, const ContentEntry& e);
    void load();
    std::vector<std::string> evict_locked(TimestampMs now, uint64_t incoming = 0);

    std::filesystem::path root_;
    StorePolicy policy_;
    const Clock* clock_;
    EvictHook evict_hook_;
    mutable std::mutex mu_;
    std::map<std::string, ContentEntry> entries_; // keyed by uri
    uint64_t total_bytes_ = 0;
};

// Mints annotated values: fresh random ids, per-(source, wire) logical
// counters. One registry per run; id uniqueness is per registry.
class AvRegistry {
public:
    explicit AvRegistry(IdGen* ids, const Clock* clock) : ids_(ids), clock_(clock) {}

    // payload_ref empty means ghost must be true, and vice versa; a mint
    // violating that is rejected.
    AnnotatedValue mint(const std::string& source_task, const std::string& wire,
                        const std::string& payload_ref, const std::string& code_version,
                        bool ghost);

    // Re-register a value recovered from a persisted registry (resume path).
    void adopt(const AnnotatedValue& av);

    const AnnotatedValue* find(const std::string& id) const;
    size_t count() const { return by_id_.size(); }

private:
    IdGen* ids_;
    const Clock* clock_;
    std::map<std::string, AnnotatedValue> by_id_;
    std::map<std::pair<std::string, std::string>, int64_t> logical_;
};

} // namespace loom
