#include "loom/store.hpp"

#include <algorithm>
#include <fstream>

#include <nlohmann/json.hpp>

#include "loom/digest.hpp"
#include "loom/error.hpp"

namespace loom {

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

const char* to_string(EvictionClass c) {
    switch (c) {
        case EvictionClass::Source: return "source";
        case EvictionClass::IntermediateCombined: return "intermediate-combined";
        case EvictionClass::IntermediateSimple: return "intermediate-simple";
    }
    return "?";
}

std::optional<EvictionClass> eviction_class_from_string(const std::string& s) {
    if (s == "source") return EvictionClass::Source;
    if (s == "intermediate-combined") return EvictionClass::IntermediateCombined;
    if (s == "intermediate-simple") return EvictionClass::IntermediateSimple;
    return std::nullopt;
}

namespace {

// Eviction order at equal age: simple intermediates are cheapest to
// recompute, sources cannot be recomputed at all.
int class_rank(EvictionClass c) {
    switch (c) {
        case EvictionClass::IntermediateSimple: return 0;
        case EvictionClass::IntermediateCombined: return 1;
        case EvictionClass::Source: return 2;
    }
    return 3;
}

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw NotFoundError("cannot read " + p.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

} // namespace

ContentStore::ContentStore(fs::path root, StorePolicy policy, const Clock* clock)
    : root_(std::move(root)), policy_(policy), clock_(clock) {
    fs::create_directories(root_ / "blobs");
    auto meta_path = root_ / "store.json";
    if (!fs::exists(meta_path)) {
        ordered_json meta = {
            {"format", "loom-store"},
            {"version", 1},
            {"hash", kHashAlgorithm},
            {"rho", policy_.rho},
        };
        std::ofstream out(meta_path);
        out << meta.dump() << "\n";
    } else {
        auto meta = ordered_json::parse(read_file(meta_path));
        if (meta.value("hash", kHashAlgorithm) != std::string(kHashAlgorithm)) {
            throw ConfigError("store at " + root_.string() + " uses hash '" +
                              meta.value("hash", "?") + "', this build speaks " + kHashAlgorithm);
        }
    }
    load();
}

fs::path ContentStore::blob_path(const std::string& hex) const {
    return root_ / "blobs" / hex.substr(0, 2) / hex.substr(2);
}

void ContentStore::load() {
    auto index_path = root_ / "index.jsonl";
    if (!fs::exists(index_path)) return;
    std::ifstream in(index_path);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        auto rec = ordered_json::parse(line);
        std::string op = rec.value("op", "");
        std::string uri = rec.value("uri", "");
        if (op == "put") {
            ContentEntry e;
            e.uri = uri;
            e.size = rec.value("size", 0ull);
            e.stored_at = rec.value("stored_at", int64_t{0});
            e.eviction_class =
                eviction_class_from_string(rec.value("class", "intermediate-simple"))
                    .value_or(EvictionClass::IntermediateSimple);
            e.pinned = rec.value("pinned", false);
            if (entries_.insert({uri, e}).second) total_bytes_ += e.size;
        } else if (op == "evict") {
            auto it = entries_.find(uri);
            if (it != entries_.end()) {
                total_bytes_ -= it->second.size;
                entries_.erase(it);
            }
        } else if (op == "pin") {
            auto it = entries_.find(uri);
            if (it != entries_.end()) it->second.pinned = rec.value("pinned", true);
        }
    }
}

void ContentStore::append_index(const std::string& op, const ContentEntry& e) {
    ordered_json rec = {
        {"op", op},
        {"uri", e.uri},
        {"size", e.size},
        {"stored_at", e.stored_at},
        {"class", to_string(e.eviction_class)},
        {"pinned", e.pinned},
    };
    std::ofstream out(root_ / "index.jsonl", std::ios::app);
    out << rec.dump() << "\n";
}

std::string ContentStore::put(std::span<const std::byte> payload, EvictionClass cls) {
    std::string hex = sha256_hex(payload);
    std::string uri = "cas:" + hex;
    std::lock_guard<std::mutex> lock(mu_);

    if (entries_.count(uri)) return uri; // content addressing: same bytes, same uri

    if (total_bytes_ + payload.size() > policy_.max_bytes) {
        evict_locked(clock_->now_ms(), payload.size());
        if (total_bytes_ + payload.size() > policy_.max_bytes) {
            throw CapacityError("store capacity exhausted after eviction pass (" +
                                std::to_string(total_bytes_) + " + " +
                                std::to_string(payload.size()) + " > " +
                                std::to_string(policy_.max_bytes) + " bytes)");
        }
    }

    auto path = blob_path(hex);
    fs::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out.write(reinterpret_cast<const char*>(payload.data()),
                  static_cast<std::streamsize>(payload.size()));
        if (!out) throw Error("failed writing blob " + tmp.string());
    }
    fs::rename(tmp, path);

    ContentEntry e;
    e.uri = uri;
    e.size = payload.size();
    e.stored_at = clock_->now_ms();
    e.eviction_class = cls;
    entries_[uri] = e;
    total_bytes_ += e.size;
    append_index("put", e);
    return uri;
}

std::string ContentStore::put(const std::string& payload, EvictionClass cls) {
    return put(std::as_bytes(std::span<const char>(payload.data(), payload.size())), cls);
}

bool ContentStore::contains(const std::string& uri) const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.count(uri) > 0;
}

std::string ContentStore::get(const std::string& uri) const {
    {
        std::lock_guard<std::mutex> lock(mu_);
        if (!entries_.count(uri)) {
            throw NotFoundError("payload " + uri + " not in store (evicted or never stored)");
        }
    }
    if (!uri.starts_with("cas:")) throw NotFoundError("malformed content uri: " + uri);
    return read_file(blob_path(uri.substr(4)));
}

std::string ContentStore::fetch(const AnnotatedValue& av) const {
    if (av.ghost || av.payload_ref.empty()) {
        throw GhostError("value " + av.id + " is a ghost: no payload to fetch");
    }
    return get(av.payload_ref);
}

void ContentStore::pin(const std::string& uri, bool pinned) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(uri);
    if (it == entries_.end()) throw NotFoundError("cannot pin unknown uri " + uri);
    it->second.pinned = pinned;
    append_index("pin", it->second);
}

std::vector<std::string> ContentStore::evict(TimestampMs now) {
    std::lock_guard<std::mutex> lock(mu_);
    return evict_locked(now);
}

std::vector<std::string> ContentStore::evict_locked(TimestampMs now, uint64_t incoming) {
    std::vector<const ContentEntry*> candidates;
    for (const auto& [_, e] : entries_) {
        if (!e.pinned) candidates.push_back(&e);
    }
    std::sort(candidates.begin(), candidates.end(),
              [](const ContentEntry* a, const ContentEntry* b) {
                  if (a->stored_at != b->stored_at) return a->stored_at < b->stored_at;
                  if (class_rank(a->eviction_class) != class_rank(b->eviction_class)) {
                      return class_rank(a->eviction_class) < class_rank(b->eviction_class);
                  }
                  return a->uri < b->uri;
              });

    std::vector<std::string> victims;
    // Pass 1: expired TTLs.
    for (const auto* e : candidates) {
        int64_t ttl = policy_.ttl_for(e->eviction_class);
        if (ttl > 0 && now - e->stored_at >= ttl) victims.push_back(e->uri);
    }
    // Pass 2: capacity pressure, oldest first. `incoming` reserves headroom
    // for a blob about to be stored.
    uint64_t projected = total_bytes_;
    for (const auto& uri : victims) projected -= entries_.at(uri).size;
    for (const auto* e : candidates) {
        if (projected + incoming <= policy_.max_bytes) break;
        if (std::find(victims.begin(), victims.end(), e->uri) != victims.end()) continue;
        victims.push_back(e->uri);
        projected -= e->size;
    }

    for (const auto& uri : victims) {
        auto it = entries_.find(uri);
        ContentEntry gone = it->second;
        total_bytes_ -= gone.size;
        entries_.erase(it);
        std::error_code ec;
        fs::remove(blob_path(uri.substr(4)), ec);
        append_index("evict", gone);
        if (evict_hook_) evict_hook_(uri);
    }
    return victims;
}

uint64_t ContentStore::total_bytes() const {
    std::lock_guard<std::mutex> lock(mu_);
    return total_bytes_;
}

size_t ContentStore::entry_count() const {
    std::lock_guard<std::mutex> lock(mu_);
    return entries_.size();
}

std::optional<ContentEntry> ContentStore::entry(const std::string& uri) const {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = entries_.find(uri);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

AnnotatedValue AvRegistry::mint(const std::string& source_task, const std::string& wire,
                                const std::string& payload_ref,
                                const std::string& code_version, bool ghost) {
    if (ghost != payload_ref.empty()) {
        throw Error("mint: ghost flag and payload ref disagree for wire '" + wire + "'");
    }
    if (code_version.empty()) {
        throw Error("mint: empty code_version for wire '" + wire + "'");
    }
    AnnotatedValue av;
    av.id = ids_->next();
    while (by_id_.count(av.id)) av.id = ids_->next();
    av.source_task = source_task;
    av.wire = wire;
    av.payload_ref = payload_ref;
    av.created_wall = clock_->now_ms();
    av.created_logical = ++logical_[{source_task, wire}];
    av.code_version = code_version;
    av.ghost = ghost;
    by_id_[av.id] = av;
    return av;
}

void AvRegistry::adopt(const AnnotatedValue& av) {
    by_id_[av.id] = av;
    auto& counter = logical_[{av.source_task, av.wire}];
    counter = std::max(counter, av.created_logical);
}

const AnnotatedValue* AvRegistry::find(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &it->second;
}

} // namespace loom
