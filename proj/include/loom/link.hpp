#pragma once

#include <deque>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "loom/clock.hpp"
#include "loom/store.hpp"
#include "loom/wiring.hpp"

namespace loom {

enum class PolicyMode { AllNew, SwapNewForOld, Merge };
enum class WaitRule { Exact, Min };

const char* to_string(PolicyMode m);
std::optional<PolicyMode> policy_mode_from_string(const std::string& s);

// When and how arrivals are folded into execution sets.
//   all_new          — no reuse: every slot must present fresh values.
//   swap_new_for_old — fresh values where available, previous values
//                      elsewhere (the rebuild-with-what-changed pattern).
//   merge            — all slots drain into one FCFS scalar stream.
// Sliding windows are per-slot refinements of the slot's advance rule.
struct SnapshotPolicy {
    PolicyMode mode = PolicyMode::AllNew;
    WaitRule wait_rule = WaitRule::Exact;
};

// One execution set: an ordered tuple of value buffers, one per slot
// (merge snapshots populate exactly one slot). The key is a digest of the
// ordered value ids, so identical assemblies key identically.
struct Snapshot {
    std::vector<std::vector<AnnotatedValue>> slots;
    TimestampMs assembled_at = 0;
    std::string key;

    bool ghost() const;
    std::vector<const AnnotatedValue*> all_values() const;
};

std::string snapshot_key(const std::vector<std::vector<AnnotatedValue>>& slots);

// Per-consumer-task link agent state: one FIFO queue per slot, window
// buffers, last-consumed sets for the swap policy, and arrival statistics.
class LinkState {
public:
    LinkState() = default;
    explicit LinkState(std::vector<InputSlot> slots, SnapshotPolicy policy = {});

    // FCFS append. The value's wire must match the slot's wire.
    void enqueue(int slot_index, const AnnotatedValue& av, TimestampMs now);
    // Enqueue onto every slot consuming this wire.
    void enqueue_wire(const std::string& wire, const AnnotatedValue& av, TimestampMs now);

    // Assemble the next snapshot under the configured policy, or nothing if
    // the rules are not yet satisfied. Call repeatedly to drain.
    std::optional<Snapshot> try_assemble(TimestampMs now);

    const SnapshotPolicy& policy() const { return policy_; }

    // Arrival statistics over the whole link.
    int64_t arrival_count() const { return arrivals_; }
    double mean_interarrival_ms() const;

    const std::vector<InputSlot>& slots() const { return slots_; }
    size_t queued(int slot_index) const { return slot_states_[slot_index].queue.size(); }
    // Unconsumed values held for this slot, whichever structure holds them.
    size_t backlog(int slot_index) const {
        const auto& st = slot_states_[slot_index];
        return st.queue.size() + st.history.size();
    }
    int64_t snapshots_assembled() const { return snapshots_; }

    // Persistence: value ids and counters only, never payloads.
    // Serialization lives in manager.cpp where ids can be resolved.
    struct QueuePersist {
        std::string id;
        TimestampMs arrived = 0;
        int64_t seq = 0;
    };
    struct SlotPersist {
        std::vector<QueuePersist> queue;
        std::vector<std::string> history;
        int64_t history_base = 0;
        int64_t windows_emitted = 0;
        std::vector<std::string> last_consumed;
        bool has_last = false;
    };
    struct Persist {
        std::vector<SlotPersist> slots;
        int64_t arrivals = 0;
        TimestampMs first_arrival = 0;
        TimestampMs last_arrival = 0;
        int64_t enqueue_seq = 0;
        int64_t snapshots = 0;
    };
    Persist persist() const;
    void restore(const Persist& p,
                 const std::function<AnnotatedValue(const std::string&)>& resolve);

private:
    struct QueuedValue {
        AnnotatedValue av;
        TimestampMs arrived = 0;
        int64_t seq = 0;
    };
    struct SlotState {
        std::deque<QueuedValue> queue;       // unconsumed, FCFS
        std::vector<AnnotatedValue> history; // windowed slots: accepted values
        int64_t history_base = 0;            // absolute index of history[0]
        int64_t windows_emitted = 0;
        std::vector<AnnotatedValue> last_consumed;
        bool has_last = false;
    };

    // Window shapes only apply outside merge, where slots keep FCFS queues.
    bool slot_windowed(int slot_index) const;
    int64_t pending_windows(int slot_index) const;
    std::vector<AnnotatedValue> take_window(int slot_index);
    std::vector<AnnotatedValue> take_buffer(int slot_index);
    bool slot_has_new(int slot_index) const;
    std::optional<Snapshot> assemble_merge(TimestampMs now);

    SnapshotPolicy policy_;
    std::vector<InputSlot> slots_;
    std::vector<SlotState> slot_states_;
    int64_t arrivals_ = 0;
    TimestampMs first_arrival_ = 0;
    TimestampMs last_arrival_ = 0;
    int64_t enqueue_seq_ = 0;
    int64_t snapshots_ = 0;
};

// Channel-selection knob: push notifications pay off when arrivals are slow
// relative to the service time; polling wins when they are frequent.
// Returns default_choice until two arrivals have been observed.
bool should_notify(const LinkState& link, double service_time_estimate_ms,
                   double threshold, bool default_choice = false);

} // namespace loom
