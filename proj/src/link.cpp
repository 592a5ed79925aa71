#include "loom/link.hpp"

#include <algorithm>
#include <tuple>

#include "loom/digest.hpp"
#include "loom/error.hpp"

namespace loom {

const char* to_string(PolicyMode m) {
    switch (m) {
    case PolicyMode::AllNew: return "all_new";
    case PolicyMode::SwapNewForOld: return "swap_new_for_old";
    case PolicyMode::Merge: return "merge";
    }
    return "?";
}

std::optional<PolicyMode> policy_mode_from_string(const std::string& s) {
    if (s == "all_new") return PolicyMode::AllNew;
    if (s == "swap_new_for_old") return PolicyMode::SwapNewForOld;
    if (s == "merge") return PolicyMode::Merge;
    return std::nullopt;
}

bool Snapshot::ghost() const {
    for (const auto& buf : slots)
        for (const auto& av : buf)
            if (av.ghost) return true;
    return false;
}

std::vector<const AnnotatedValue*> Snapshot::all_values() const {
    std::vector<const AnnotatedValue*> out;
    for (const auto& buf : slots)
        for (const auto& av : buf) out.push_back(&av);
    return out;
}

std::string snapshot_key(const std::vector<std::vector<AnnotatedValue>>& slots) {
    std::vector<std::string> fields;
    for (size_t i = 0; i < slots.size(); ++i) {
        fields.push_back("slot:" + std::to_string(i));
        for (const auto& av : slots[i]) fields.push_back(av.id);
    }
    return sha256_fields(fields);
}

LinkState::LinkState(std::vector<InputSlot> slots, SnapshotPolicy policy)
    : policy_(policy), slots_(std::move(slots)) {
    slot_states_.resize(slots_.size());
}

bool LinkState::slot_windowed(int slot_index) const {
    return slots_[slot_index].windowed() && policy_.mode != PolicyMode::Merge;
}

void LinkState::enqueue(int slot_index, const AnnotatedValue& av, TimestampMs now) {
    auto& slot = slots_.at(slot_index);
    if (av.wire != slot.wire)
        throw Error("enqueue: value for wire '" + av.wire + "' offered to slot '" +
                    slot.wire + "'");
    auto& st = slot_states_[slot_index];
    if (slot_windowed(slot_index))
        st.history.push_back(av);
    else
        st.queue.push_back(QueuedValue{av, now, enqueue_seq_++});

    ++arrivals_;
    if (arrivals_ == 1) first_arrival_ = now;
    last_arrival_ = now;
}

void LinkState::enqueue_wire(const std::string& wire, const AnnotatedValue& av,
                             TimestampMs now) {
    for (size_t i = 0; i < slots_.size(); ++i)
        if (slots_[i].wire == wire && !slots_[i].implicit)
            enqueue(static_cast<int>(i), av, now);
}

double LinkState::mean_interarrival_ms() const {
    if (arrivals_ < 2) return 0.0;
    return static_cast<double>(last_arrival_ - first_arrival_) /
           static_cast<double>(arrivals_ - 1);
}

int64_t LinkState::pending_windows(int slot_index) const {
    const auto& slot = slots_[slot_index];
    const auto& st = slot_states_[slot_index];
    int64_t n = *slot.window_size;
    int64_t s = *slot.slide;
    int64_t k = st.history_base + static_cast<int64_t>(st.history.size());
    int64_t total = k >= n ? (k - n) / s + 1 : 0;
    return total - st.windows_emitted;
}

std::vector<AnnotatedValue> LinkState::take_window(int slot_index) {
    const auto& slot = slots_[slot_index];
    auto& st = slot_states_[slot_index];
    int64_t n = *slot.window_size;
    int64_t s = *slot.slide;
    int64_t start = st.windows_emitted * s; // absolute index of window head
    std::vector<AnnotatedValue> out;
    out.reserve(static_cast<size_t>(n));
    for (int64_t j = start; j < start + n; ++j)
        out.push_back(st.history.at(static_cast<size_t>(j - st.history_base)));
    ++st.windows_emitted;
    // Values before the next window's head can never be read again.
    int64_t keep_from = st.windows_emitted * s;
    if (keep_from > st.history_base) {
        st.history.erase(st.history.begin(),
                         st.history.begin() + (keep_from - st.history_base));
        st.history_base = keep_from;
    }
    return out;
}

std::vector<AnnotatedValue> LinkState::take_buffer(int slot_index) {
    const auto& slot = slots_[slot_index];
    auto& st = slot_states_[slot_index];
    size_t take = static_cast<size_t>(slot.required());
    if (policy_.wait_rule == WaitRule::Min && st.queue.size() > take)
        take = st.queue.size();
    std::vector<AnnotatedValue> out;
    out.reserve(take);
    for (size_t i = 0; i < take; ++i) {
        out.push_back(st.queue.front().av);
        st.queue.pop_front();
    }
    return out;
}

bool LinkState::slot_has_new(int slot_index) const {
    const auto& slot = slots_[slot_index];
    const auto& st = slot_states_[slot_index];
    if (slot.implicit) return false; // resolved at execution time, never queued
    if (slot_windowed(slot_index)) return pending_windows(slot_index) >= 1;
    return st.queue.size() >= static_cast<size_t>(slot.required());
}

std::optional<Snapshot> LinkState::assemble_merge(TimestampMs now) {
    // One combined FCFS stream across every stream slot. Ties on arrival
    // wall time break on (logical counter, source task name).
    int best_slot = -1;
    const QueuedValue* best = nullptr;
    auto order_key = [](const QueuedValue& v) {
        return std::tuple<TimestampMs, int64_t, const std::string&, int64_t>(
            v.arrived, v.av.created_logical, v.av.source_task, v.seq);
    };
    for (size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i].implicit) continue;
        const auto& q = slot_states_[i].queue;
        if (q.empty()) continue;
        if (!best || order_key(q.front()) < order_key(*best)) {
            best = &q.front();
            best_slot = static_cast<int>(i);
        }
    }
    if (!best) return std::nullopt;

    Snapshot snap;
    snap.slots.resize(slots_.size());
    snap.slots[best_slot].push_back(best->av);
    auto& st = slot_states_[best_slot];
    st.last_consumed = snap.slots[best_slot];
    st.has_last = true;
    st.queue.pop_front();
    snap.assembled_at = now;
    snap.key = snapshot_key(snap.slots);
    ++snapshots_;
    return snap;
}

std::optional<Snapshot> LinkState::try_assemble(TimestampMs now) {
    if (slots_.empty()) return std::nullopt;
    if (policy_.mode == PolicyMode::Merge) return assemble_merge(now);

    // Implicit slots carry no queued data; they are satisfied out-of-band
    // at execution time and their snapshot buffer stays empty.
    if (policy_.mode == PolicyMode::AllNew) {
        for (size_t i = 0; i < slots_.size(); ++i)
            if (!slots_[i].implicit && !slot_has_new(static_cast<int>(i)))
                return std::nullopt;
        bool any_stream = false;
        for (const auto& s : slots_) any_stream = any_stream || !s.implicit;
        if (!any_stream) return std::nullopt;
        Snapshot snap;
        snap.slots.resize(slots_.size());
        for (size_t i = 0; i < slots_.size(); ++i) {
            if (slots_[i].implicit) continue;
            int idx = static_cast<int>(i);
            snap.slots[i] = slot_windowed(idx) ? take_window(idx) : take_buffer(idx);
            slot_states_[i].last_consumed = snap.slots[i];
            slot_states_[i].has_last = true;
        }
        snap.assembled_at = now;
        snap.key = snapshot_key(snap.slots);
        ++snapshots_;
        return snap;
    }

    // swap_new_for_old: fire as soon as something is new, provided every
    // other slot can contribute either a new set or its previous one.
    bool any_new = false;
    for (size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i].implicit) continue;
        int idx = static_cast<int>(i);
        bool fresh = slot_has_new(idx);
        any_new = any_new || fresh;
        if (!fresh && !slot_states_[i].has_last) return std::nullopt;
    }
    if (!any_new) return std::nullopt;

    Snapshot snap;
    snap.slots.resize(slots_.size());
    for (size_t i = 0; i < slots_.size(); ++i) {
        if (slots_[i].implicit) continue;
        int idx = static_cast<int>(i);
        if (slot_has_new(idx)) {
            snap.slots[i] = slot_windowed(idx) ? take_window(idx) : take_buffer(idx);
            slot_states_[i].last_consumed = snap.slots[i];
            slot_states_[i].has_last = true;
        } else {
            snap.slots[i] = slot_states_[i].last_consumed;
        }
    }
    snap.assembled_at = now;
    snap.key = snapshot_key(snap.slots);
    ++snapshots_;
    return snap;
}

LinkState::Persist LinkState::persist() const {
    Persist p;
    p.arrivals = arrivals_;
    p.first_arrival = first_arrival_;
    p.last_arrival = last_arrival_;
    p.enqueue_seq = enqueue_seq_;
    p.snapshots = snapshots_;
    for (const auto& st : slot_states_) {
        SlotPersist sp;
        for (const auto& qv : st.queue)
            sp.queue.push_back(QueuePersist{qv.av.id, qv.arrived, qv.seq});
        for (const auto& av : st.history) sp.history.push_back(av.id);
        sp.history_base = st.history_base;
        sp.windows_emitted = st.windows_emitted;
        for (const auto& av : st.last_consumed) sp.last_consumed.push_back(av.id);
        sp.has_last = st.has_last;
        p.slots.push_back(std::move(sp));
    }
    return p;
}

void LinkState::restore(const Persist& p,
                        const std::function<AnnotatedValue(const std::string&)>& resolve) {
    if (p.slots.size() != slots_.size())
        throw Error("link restore: slot count mismatch (" +
                    std::to_string(p.slots.size()) + " saved, " +
                    std::to_string(slots_.size()) + " declared)");
    arrivals_ = p.arrivals;
    first_arrival_ = p.first_arrival;
    last_arrival_ = p.last_arrival;
    enqueue_seq_ = p.enqueue_seq;
    snapshots_ = p.snapshots;
    for (size_t i = 0; i < slots_.size(); ++i) {
        auto& st = slot_states_[i];
        st = SlotState{};
        for (const auto& qp : p.slots[i].queue)
            st.queue.push_back(QueuedValue{resolve(qp.id), qp.arrived, qp.seq});
        for (const auto& id : p.slots[i].history) st.history.push_back(resolve(id));
        st.history_base = p.slots[i].history_base;
        st.windows_emitted = p.slots[i].windows_emitted;
        for (const auto& id : p.slots[i].last_consumed)
            st.last_consumed.push_back(resolve(id));
        st.has_last = p.slots[i].has_last;
    }
}

bool should_notify(const LinkState& link, double service_time_estimate_ms,
                   double threshold, bool default_choice) {
    if (link.arrival_count() < 2) return default_choice;
    if (service_time_estimate_ms <= 0.0) return true;
    return link.mean_interarrival_ms() / service_time_estimate_ms > threshold;
}

} // namespace loom
