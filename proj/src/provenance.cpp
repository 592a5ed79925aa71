#include "loom/provenance.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "loom/error.hpp"

namespace loom {

namespace {

constexpr const char* kFormatName = "loom-registry";
constexpr int kFormatVersion = 1;

std::string pad_right(const std::string& s, size_t width) {
    if (s.size() >= width) return s;
    return s + std::string(width - s.size(), ' ');
}

std::string short_key(const std::string& k, size_t n = 12) {
    return k.size() > n ? k.substr(0, n) : k;
}

} // namespace

const char* to_string(EventKind k) {
    switch (k) {
    case EventKind::Ingest: return "ingest";
    case EventKind::Enqueue: return "enqueue";
    case EventKind::Assemble: return "assemble";
    case EventKind::ExecStart: return "exec_start";
    case EventKind::ExecEnd: return "exec_end";
    case EventKind::CacheHit: return "cache_hit";
    case EventKind::ImplicitLookup: return "implicit_lookup";
    case EventKind::Mint: return "mint";
    case EventKind::Evict: return "evict";
    case EventKind::Trigger: return "trigger";
    }
    return "?";
}

std::optional<EventKind> event_kind_from_string(const std::string& s) {
    static const std::map<std::string, EventKind> table = {
        {"ingest", EventKind::Ingest},
        {"enqueue", EventKind::Enqueue},
        {"assemble", EventKind::Assemble},
        {"exec_start", EventKind::ExecStart},
        {"exec_end", EventKind::ExecEnd},
        {"cache_hit", EventKind::CacheHit},
        {"implicit_lookup", EventKind::ImplicitLookup},
        {"mint", EventKind::Mint},
        {"evict", EventKind::Evict},
        {"trigger", EventKind::Trigger},
    };
    auto it = table.find(s);
    if (it == table.end()) return std::nullopt;
    return it->second;
}

nlohmann::ordered_json ProvenanceEvent::to_json() const {
    nlohmann::ordered_json j;
    j["seq"] = seq;
    j["at"] = at;
    j["kind"] = to_string(kind);
    if (!task.empty()) j["task"] = task;
    if (!wire.empty()) j["wire"] = wire;
    if (!av.empty()) j["av"] = av;
    if (!inputs.empty()) j["inputs"] = inputs;
    if (!outputs.empty()) j["outputs"] = outputs;
    if (!key.empty()) j["key"] = key;
    if (!extra.empty()) j["extra"] = extra;
    return j;
}

ProvenanceEvent ProvenanceEvent::from_json(const nlohmann::ordered_json& j) {
    ProvenanceEvent ev;
    ev.seq = j.at("seq").get<int64_t>();
    ev.at = j.at("at").get<TimestampMs>();
    auto kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (!kind)
        throw ConfigError("registry: unknown event kind '" +
                          j.at("kind").get<std::string>() + "'");
    ev.kind = *kind;
    if (j.contains("task")) ev.task = j["task"].get<std::string>();
    if (j.contains("wire")) ev.wire = j["wire"].get<std::string>();
    if (j.contains("av")) ev.av = j["av"].get<std::string>();
    if (j.contains("inputs")) ev.inputs = j["inputs"].get<std::vector<std::string>>();
    if (j.contains("outputs")) ev.outputs = j["outputs"].get<std::vector<std::string>>();
    if (j.contains("key")) ev.key = j["key"].get<std::string>();
    if (j.contains("extra")) ev.extra = j["extra"];
    return ev;
}

Registry::Registry(const std::filesystem::path& file) : path_(file) {
    namespace fs = std::filesystem;
    if (fs::exists(path_)) {
        load();
        out_.open(path_, std::ios::app);
    } else {
        if (path_.has_parent_path()) fs::create_directories(path_.parent_path());
        out_.open(path_, std::ios::app);
        nlohmann::ordered_json header;
        header["format"] = kFormatName;
        header["version"] = kFormatVersion;
        write_line(header);
    }
    if (!out_) throw Error("registry: cannot open " + path_.string() + " for append");
}

void Registry::load() {
    std::ifstream in(path_);
    if (!in) throw Error("registry: cannot read " + path_.string());
    std::string line;
    bool saw_header = false;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::ordered_json j;
        try {
            j = nlohmann::ordered_json::parse(line);
        } catch (const std::exception& e) {
            throw ConfigError("registry: bad line " + std::to_string(line_no) + " in " +
                              path_.string() + ": " + e.what());
        }
        if (!saw_header) {
            if (j.value("format", "") != kFormatName)
                throw ConfigError("registry: " + path_.string() +
                                  " missing format header");
            if (j.value("version", 0) != kFormatVersion)
                throw ConfigError("registry: unsupported version in " + path_.string());
            saw_header = true;
            continue;
        }
        ProvenanceEvent ev = ProvenanceEvent::from_json(j);
        next_seq_ = std::max(next_seq_, ev.seq + 1);
        events_.push_back(std::move(ev));
    }
    if (!saw_header)
        throw ConfigError("registry: " + path_.string() + " is empty (no header)");
}

void Registry::write_line(const nlohmann::ordered_json& j) {
    out_ << j.dump() << "\n";
    out_.flush();
}

int64_t Registry::append(ProvenanceEvent ev) {
    ev.seq = next_seq_++;
    if (out_.is_open()) write_line(ev.to_json());
    int64_t seq = ev.seq;
    events_.push_back(std::move(ev));
    return seq;
}

// ---------------------------------------------------------------------------
// Derived views. These only read events_, so a replayed registry renders
// identically to the live one.

namespace {

struct EventIndex {
    // id -> event producing that value (ingest or mint)
    std::map<std::string, const ProvenanceEvent*> produced_by;
    // id -> completed execution that listed it in outputs (exec_end/cache_hit)
    std::map<std::string, const ProvenanceEvent*> minted_in;
    // (task, exec_n) -> exec_start
    std::map<std::pair<std::string, int64_t>, const ProvenanceEvent*> starts;
    // (task, exec_n) -> implicit lookups, in seq order
    std::map<std::pair<std::string, int64_t>, std::vector<const ProvenanceEvent*>> lookups;
    // (task, snapshot key) -> assemble events, in seq order
    std::map<std::pair<std::string, std::string>, std::vector<const ProvenanceEvent*>> assembles;
    // cache key -> first successful exec_end; what a later hit replays
    std::map<std::string, const ProvenanceEvent*> first_end_by_key;

    explicit EventIndex(const std::vector<ProvenanceEvent>& events) {
        for (const auto& ev : events) {
            switch (ev.kind) {
            case EventKind::Ingest:
            case EventKind::Mint:
                produced_by.emplace(ev.av, &ev);
                break;
            case EventKind::ExecEnd:
                if (ev.extra.value("exit", -1) == 0 && !ev.key.empty())
                    first_end_by_key.emplace(ev.key, &ev);
                for (const auto& id : ev.outputs) minted_in.emplace(id, &ev);
                break;
            case EventKind::CacheHit:
                for (const auto& id : ev.outputs) minted_in.emplace(id, &ev);
                break;
            case EventKind::ExecStart:
                starts.emplace(std::make_pair(ev.task, exec_n(ev)), &ev);
                break;
            case EventKind::ImplicitLookup:
                lookups[std::make_pair(ev.task, exec_n(ev))].push_back(&ev);
                break;
            case EventKind::Assemble:
                assembles[std::make_pair(ev.task, ev.key)].push_back(&ev);
                break;
            default:
                break;
            }
        }
    }

    static int64_t exec_n(const ProvenanceEvent& ev) {
        return ev.extra.value("exec_n", int64_t{-1});
    }
    static std::string snapshot_key_of(const ProvenanceEvent& ev) {
        if (ev.kind == EventKind::ExecStart) return ev.key;
        return ev.extra.value("snapshot_key", "");
    }
};

} // namespace

std::string Registry::traveller(const std::string& av_id) const {
    EventIndex index(events_);
    if (!index.produced_by.count(av_id))
        throw NotFoundError("traveller: unknown value id '" + av_id + "'");

    std::ostringstream os;
    os << "traveller log for value " << av_id << "\n";
    std::set<std::string> visited;

    // Depth-first backward walk; shared ancestors are shown once.
    std::function<void(const std::string&, int)> walk = [&](const std::string& id,
                                                            int depth) {
        std::string indent(static_cast<size_t>(depth), ' ');
        auto pit = index.produced_by.find(id);
        if (pit == index.produced_by.end()) {
            os << indent << "value " << id << "  (not in this registry)\n";
            return;
        }
        const ProvenanceEvent& prod = *pit->second;
        if (visited.count(id)) {
            os << indent << "value " << id << "  (shown above)\n";
            return;
        }
        visited.insert(id);

        if (prod.kind == EventKind::Ingest) {
            os << indent << "value " << id << "  wire=" << prod.wire << "  ingested  at="
               << format_timestamp(prod.at);
            if (prod.extra.value("ghost", false)) os << "  ghost";
            os << "\n";
            return;
        }

        os << indent << "value " << id << "  wire=" << prod.wire << "  task="
           << prod.task << "  version=" << prod.extra.value("code_version", "")
           << "  at=" << format_timestamp(prod.at);
        if (prod.extra.value("ghost", false)) os << "  ghost";
        os << "\n";

        auto mit = index.minted_in.find(id);
        if (mit == index.minted_in.end()) return;
        const ProvenanceEvent& exec = *mit->second;
        int64_t n = EventIndex::exec_n(exec);
        os << indent << "  via " << (exec.kind == EventKind::CacheHit ? "cache hit"
                                                                      : "execution")
           << " " << exec.task << "#" << n << "  snapshot="
           << short_key(EventIndex::snapshot_key_of(exec));
        if (exec.kind == EventKind::CacheHit) {
            // A hit re-mints what a previous execution computed; name it.
            auto oit = index.first_end_by_key.find(exec.key);
            if (oit != index.first_end_by_key.end())
                os << "  replays=" << short_key(EventIndex::snapshot_key_of(*oit->second));
        }
        os << "\n";
        for (const auto* lk : index.lookups[{exec.task, n}])
            os << indent << "    lookup " << lk->wire << " sha256:" << short_key(lk->key)
               << "\n";

        // Inputs ride on the exec_start record; cache hits have no start and
        // carry their (freshly assembled) inputs themselves.
        const std::vector<std::string>* input_ids = &exec.inputs;
        if (exec.kind == EventKind::ExecEnd) {
            auto sit = index.starts.find({exec.task, n});
            if (sit != index.starts.end()) input_ids = &sit->second->inputs;
        }
        for (const auto& input : *input_ids) walk(input, depth + 4);
    };

    walk(av_id, 0);
    return os.str();
}

std::string Registry::checkpoint(const std::string& task_name) const {
    std::vector<const ProvenanceEvent*> mine;
    for (const auto& ev : events_) {
        if (ev.task != task_name) continue;
        switch (ev.kind) {
        case EventKind::Assemble:
        case EventKind::ExecStart:
        case EventKind::ExecEnd:
        case EventKind::CacheHit:
        case EventKind::ImplicitLookup:
        case EventKind::Mint:
            mine.push_back(&ev);
            break;
        default:
            break;
        }
    }
    if (mine.empty())
        throw NotFoundError("checkpoint: no events for task '" + task_name + "'");

    std::ostringstream os;
    os << "New process timeline for ( " << task_name << " )\n\n";
    os << "Unix clock context              | root --> NOW,delta  Comment indented by subtime\n";
    os << std::string(90, '-') << "\n";

    // Each assembled snapshot opens a major step (one execution attempt);
    // everything that happens inside it takes minor steps.
    int major = 0;
    int minor = 1;
    auto emit = [&](TimestampMs at, bool is_major, const std::string& comment) {
        char head[40];
        if (is_major) {
            major += 1;
            minor = 1;
            std::snprintf(head, sizeof(head), "|%5d -->%4d,%d", major - 1, major, minor);
        } else {
            minor += 1;
            std::snprintf(head, sizeof(head), "|       ->%4d,%d", major, minor);
        }
        size_t gap = 6 + 2 * static_cast<size_t>(minor - 1);
        os << pad_right(format_timestamp(at), 30) << "  " << head
           << std::string(gap, ' ') << comment << " \n";
    };

    for (const auto* ev : mine) {
        switch (ev->kind) {
        case EventKind::Assemble:
            emit(ev->at, true, "assemble snapshot " + short_key(ev->key));
            break;
        case EventKind::ExecStart:
            emit(ev->at, false,
                 "[exec: #" + std::to_string(EventIndex::exec_n(*ev)) + " version " +
                     ev->extra.value("code_version", "") + "]");
            break;
        case EventKind::ImplicitLookup:
            emit(ev->at, false,
                 "[lookup: " + ev->wire + " sha256:" + short_key(ev->key) + "]");
            break;
        case EventKind::Mint:
            emit(ev->at, false, "[minted: " + ev->wire + " " + ev->av + "]");
            break;
        case EventKind::ExecEnd: {
            std::string line = "[exit: " + std::to_string(ev->extra.value("exit", 0)) +
                               " in " +
                               std::to_string(ev->extra.value("duration_ms", int64_t{0})) +
                               "ms]";
            emit(ev->at, false, line);
            std::string err = ev->extra.value("stderr", "");
            if (!err.empty()) {
                auto nl = err.find('\n');
                emit(ev->at, false, "[stderr: " + err.substr(0, nl) + "]");
            }
            break;
        }
        case EventKind::CacheHit:
            emit(ev->at, false, "[cache: hit " + short_key(ev->key) + "]");
            break;
        default:
            break;
        }
    }
    return os.str();
}

std::vector<ConceptEdge> Registry::concept_edges() const {
    EventIndex index(events_);
    std::vector<ConceptEdge> edges;
    std::set<ConceptEdge> seen;
    auto add = [&](const std::string& from, const std::string& to,
                   const std::string& rel) {
        ConceptEdge e{from, to, rel};
        if (seen.insert(e).second) edges.push_back(std::move(e));
    };

    for (const auto& ev : events_) {
        if (ev.kind == EventKind::Assemble) {
            for (const auto& id : ev.inputs) {
                auto pit = index.produced_by.find(id);
                if (pit == index.produced_by.end()) continue;
                const ProvenanceEvent& prod = *pit->second;
                if (prod.kind == EventKind::Mint)
                    add(prod.task, ev.task, "precedes");
                else
                    add(ev.task, "[file: " + prod.wire + "]", "may_determine");
            }
        } else if (ev.kind == EventKind::ImplicitLookup) {
            add(ev.task, "[service: " + ev.wire + "]", "may_determine");
        }
    }
    return edges;
}

std::string Registry::concept_map() const {
    auto edges = concept_edges();

    // Indent each line by the causal depth of its source entity: shallowest
    // hop count from an entity with no incoming `precedes` edge.
    std::map<std::string, int> depth;
    std::map<std::string, std::vector<std::string>> succ;
    std::set<std::string> entities, has_pred;
    for (const auto& e : edges) {
        if (e.relation != "precedes") continue;
        entities.insert(e.from);
        entities.insert(e.to);
        succ[e.from].push_back(e.to);
        has_pred.insert(e.to);
    }
    std::vector<std::string> frontier;
    for (const auto& ent : entities)
        if (!has_pred.count(ent)) {
            depth[ent] = 0;
            frontier.push_back(ent);
        }
    while (!frontier.empty()) {
        std::vector<std::string> next;
        for (const auto& ent : frontier)
            for (const auto& to : succ[ent])
                if (!depth.count(to)) {
                    depth[to] = depth[ent] + 1;
                    next.push_back(to);
                }
        frontier = std::move(next);
    }

    auto indent_for = [&](const std::string& ent) {
        int d = depth.count(ent) ? depth[ent] : 0;
        return d == 0 ? std::string() : std::string(2 + 3 * (d - 1), ' ');
    };

    std::ostringstream os;
    os << "<begin NON-LOCAL CAUSE>\n";
    for (const auto& e : edges)
        if (e.relation == "precedes")
            os << indent_for(e.from) << "(" << e.from << ") --b(precedes)--> \"" << e.to
               << "\"\n";
    for (const auto& e : edges)
        if (e.relation == "may_determine")
            os << indent_for(e.from) << "(" << e.from << ") --b(may determine)--> \""
               << e.to << "\"\n";
    os << "<end NON-LOCAL CAUSE>\n";
    return os.str();
}

std::vector<const ProvenanceEvent*> Registry::causal_closure(
    const std::string& av_id) const {
    EventIndex index(events_);
    if (!index.produced_by.count(av_id))
        throw NotFoundError("unknown value id '" + av_id + "'");

    std::set<const ProvenanceEvent*> picked;
    std::set<std::string> visited;
    std::function<void(const std::string&)> walk = [&](const std::string& id) {
        if (visited.count(id)) return;
        visited.insert(id);
        auto pit = index.produced_by.find(id);
        if (pit == index.produced_by.end()) return;
        picked.insert(pit->second);
        if (pit->second->kind == EventKind::Ingest) return;

        auto mit = index.minted_in.find(id);
        if (mit == index.minted_in.end()) return;
        const ProvenanceEvent& exec = *mit->second;
        picked.insert(&exec);
        int64_t n = EventIndex::exec_n(exec);
        auto sit = index.starts.find({exec.task, n});
        if (sit != index.starts.end()) picked.insert(sit->second);
        for (const auto* lk : index.lookups[{exec.task, n}]) picked.insert(lk);
        auto ait = index.assembles.find({exec.task, EventIndex::snapshot_key_of(exec)});
        if (ait != index.assembles.end())
            for (const auto* a : ait->second) picked.insert(a);
        // Same indirection the traveller uses: exec_end events carry outputs
        // only, their inputs live on the matching exec_start.
        const std::vector<std::string>* input_ids = &exec.inputs;
        if (exec.kind == EventKind::ExecEnd && sit != index.starts.end())
            input_ids = &sit->second->inputs;
        for (const auto& input : *input_ids) walk(input);
    };
    walk(av_id);

    std::vector<const ProvenanceEvent*> out(picked.begin(), picked.end());
    std::sort(out.begin(), out.end(),
              [](const ProvenanceEvent* a, const ProvenanceEvent* b) {
                  return a->seq < b->seq;
              });
    return out;
}

std::vector<const ProvenanceEvent*> Registry::query(const std::string& field,
                                                    const std::string& value) const {
    std::vector<const ProvenanceEvent*> out;
    if (field == "av") return causal_closure(value);
    if (field == "kind") {
        if (!event_kind_from_string(value))
            throw ConfigError("query: unknown event kind '" + value + "'");
        for (const auto& ev : events_)
            if (to_string(ev.kind) == value) out.push_back(&ev);
        return out;
    }
    if (field == "task") {
        for (const auto& ev : events_)
            if (ev.task == value) out.push_back(&ev);
        return out;
    }
    if (field == "wire") {
        for (const auto& ev : events_)
            if (ev.wire == value) out.push_back(&ev);
        return out;
    }
    if (field == "key") {
        for (const auto& ev : events_)
            if (ev.key == value) out.push_back(&ev);
        return out;
    }
    throw ConfigError("query: unknown field '" + field +
                      "' (use kind, task, wire, key, or av)");
}

} // namespace loom
