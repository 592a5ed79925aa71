#include "loom/manager.hpp"

#include <algorithm>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "loom/digest.hpp"
#include "loom/error.hpp"

namespace loom {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Event feeds and small types.

std::vector<SourceEvent> parse_event_file(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("event file: cannot read " + file.string());
    std::vector<SourceEvent> out;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::string trimmed = line;
        trimmed.erase(0, trimmed.find_first_not_of(" \t"));
        if (trimmed.empty() || trimmed[0] == '#') continue;
        std::istringstream is(trimmed);
        SourceEvent ev;
        if (!(is >> ev.wire >> ev.delay_ms))
            throw ParseError("event file: expected '<wire> <delay-ms> <payload-path>'",
                             line_no, 1);
        if (ev.delay_ms < 0)
            throw ParseError("event file: delay must be >= 0", line_no, 1);
        std::getline(is, ev.payload_path);
        ev.payload_path.erase(0, ev.payload_path.find_first_not_of(" \t"));
        while (!ev.payload_path.empty() &&
               (ev.payload_path.back() == ' ' || ev.payload_path.back() == '\t' ||
                ev.payload_path.back() == '\r'))
            ev.payload_path.pop_back();
        if (ev.payload_path.empty())
            throw ParseError("event file: missing payload path", line_no, 1);
        out.push_back(std::move(ev));
    }
    return out;
}

const char* to_string(TriggerKind k) {
    switch (k) {
    case TriggerKind::SampleUpdate: return "sample_update";
    case TriggerKind::SoftwareUpdate: return "software_update";
    case TriggerKind::ServiceUpdate: return "service_update";
    }
    return "?";
}

std::optional<TriggerKind> trigger_kind_from_string(const std::string& s) {
    if (s == "sample_update") return TriggerKind::SampleUpdate;
    if (s == "software_update") return TriggerKind::SoftwareUpdate;
    if (s == "service_update") return TriggerKind::ServiceUpdate;
    return std::nullopt;
}

int64_t RunReport::invocations() const {
    int64_t n = 0;
    for (const auto& rec : executions)
        if (!rec.cached && !rec.ghost && rec.exit_status) ++n;
    return n;
}

void RunReport::write_jsonl(std::ostream& os) const {
    ordered_json head;
    head["record"] = "run";
    head["mode"] = mode;
    head["seed"] = seed;
    head["source_events"] = source_events;
    head["invocations"] = invocations();
    os << head.dump() << "\n";

    for (const auto& rec : executions) {
        ordered_json j;
        j["record"] = "execution";
        j["task"] = rec.task;
        j["n"] = rec.exec_n;
        j["snapshot_key"] = rec.snapshot_key;
        j["cache_key"] = rec.cache_key;
        j["code_version"] = rec.code_version;
        j["cached"] = rec.cached;
        j["ghost"] = rec.ghost;
        if (rec.exit_status)
            j["exit"] = *rec.exit_status;
        else
            j["exit"] = nullptr;
        j["started"] = rec.started;
        j["finished"] = rec.finished;
        j["inputs"] = rec.input_ids;
        ordered_json imps = ordered_json::array();
        for (const auto& [w, d] : rec.implicit_digests) imps.push_back({w, d});
        j["implicits"] = imps;
        ordered_json outs = ordered_json::array();
        for (const auto& [w, id] : rec.outputs) outs.push_back({w, id});
        j["outputs"] = outs;
        if (!rec.stderr_text.empty()) j["stderr"] = rec.stderr_text;
        os << j.dump() << "\n";
    }
    for (const auto& [task, count] : snapshots) {
        ordered_json j{{"record", "snapshots"}, {"task", task}, {"count", count}};
        os << j.dump() << "\n";
    }
    for (const auto& [task, push] : push_channel) {
        ordered_json j{{"record", "channel"}, {"task", task}, {"push", push}};
        os << j.dump() << "\n";
    }
    for (const auto& row : routing) {
        ordered_json j{{"record", "route"},
                       {"lineage", row.lineage},
                       {"wire", row.wire},
                       {"consumer", row.consumer}};
        os << j.dump() << "\n";
    }
    for (const auto& [task, count] : cycle_suppressed) {
        ordered_json j{{"record", "cycle_suppressed"}, {"task", task}, {"count", count}};
        os << j.dump() << "\n";
    }
    for (const auto& t : terminal) {
        ordered_json j{{"record", "terminal"}, {"wire", t.wire}, {"av", t.av},
                       {"uri", t.uri}};
        os << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Engine construction.

Engine::Engine(const PipelineSpec& spec, RunSettings settings, ContentStore& store,
               Registry& registry, bool ghost)
    : spec_(spec),
      settings_(std::move(settings)),
      store_(&store),
      registry_(&registry),
      ghost_(ghost),
      clock_(settings_.engine.deterministic, kSimEpochMs),
      ids_(settings_.engine.seed),
      avs_(&ids_, &clock_) {
    auto diags = validate(spec_);
    if (has_errors(diags)) {
        for (const auto& d : diags)
            if (d.severity == Severity::Error)
                throw Error("invalid pipeline: " + d.message);
    }
    if (settings_.engine.deterministic) settings_.engine.workers = 1;
    store_->set_clock(&clock_);

    for (const auto& t : spec_.tasks) {
        if (!settings_.tasks.count(t.name)) settings_.tasks[t.name] = TaskConfig{};
        TaskState ts;
        ts.decl = spec_.find_task(t.name);
        ts.config = settings_.tasks[t.name];
        ts.link = LinkState(t.inputs, ts.config.policy);
        tasks_.emplace(t.name, std::move(ts));

        for (size_t si = 0; si < t.inputs.size(); ++si) {
            const auto& slot = t.inputs[si];
            if (!slot.implicit)
                consumers_[slot.wire].push_back({t.name, static_cast<int>(si)});
        }
        for (const auto& out : t.outputs) producer_[out.wire] = t.name;
    }
    compute_cycle_membership();
    // Plugins run chdir'ed into their workdir; every path handed to them
    // must survive that, so the scratch tree is absolute.
    scratch_ = fs::absolute(store_->root()) / "work";
}

void Engine::compute_cycle_membership() {
    // A task is cycle-bound if it can reach itself over stream edges.
    auto successors = [&](const std::string& name) {
        std::vector<std::string> out;
        const TaskDecl* decl = spec_.find_task(name);
        for (const auto& o : decl->outputs) {
            if (o.implicit) continue;
            auto it = consumers_.find(o.wire);
            if (it == consumers_.end()) continue;
            for (const auto& [consumer, slot] : it->second) out.push_back(consumer);
        }
        return out;
    };
    for (auto& [name, ts] : tasks_) {
        std::set<std::string> seen;
        std::vector<std::string> frontier = successors(name);
        bool cyclic = false;
        while (!frontier.empty() && !cyclic) {
            std::vector<std::string> next;
            for (const auto& s : frontier) {
                if (s == name) {
                    cyclic = true;
                    break;
                }
                if (seen.insert(s).second)
                    for (const auto& nn : successors(s)) next.push_back(nn);
            }
            frontier = std::move(next);
        }
        ts.in_cycle = cyclic;
    }
}

// ---------------------------------------------------------------------------
// Reactive propagation.

void Engine::schedule(Action a) {
    a.seq = action_seq_++;
    queue_.push(std::move(a));
}

RunReport Engine::run_reactive(std::vector<SourceEvent> events, StopCondition stop) {
    report_ = RunReport{};
    report_.mode = ghost_ ? "ghost" : "reactive";
    report_.seed = settings_.engine.seed;

    if (stop.max_source_events && static_cast<int64_t>(events.size()) > *stop.max_source_events)
        events.resize(static_cast<size_t>(*stop.max_source_events));
    report_.source_events = static_cast<int64_t>(events.size());

    for (const auto& ev : events) {
        bool is_source = !producer_.count(ev.wire) && consumers_.count(ev.wire);
        if (!is_source)
            throw Error("undeclared source feed '" + ev.wire + "'" +
                        (producer_.count(ev.wire)
                             ? " (wire is produced by task '" + producer_[ev.wire] + "')"
                             : " (no task consumes it)"));
    }

    events_ = std::move(events);
    TimestampMs at = clock_.now_ms();
    for (size_t i = 0; i < events_.size(); ++i) {
        at += events_[i].delay_ms;
        Action a;
        a.at = at;
        a.type = Action::Type::Ingest;
        a.event_index = i;
        schedule(std::move(a));
    }

    drain_queue(stop);
    finish_report(report_);
    return report_;
}

void Engine::drain_queue(const StopCondition& stop) {
    while (!queue_.empty()) {
        Action a = queue_.top();
        if (stop.deadline_ms && a.at > *stop.deadline_ms) {
            // Past the deadline: abandon what remains.
            queue_ = {};
            break;
        }
        queue_.pop();

        if (clock_.simulated()) {
            clock_.advance_to(a.at);
        } else if (a.at > clock_.now_ms()) {
            std::this_thread::sleep_for(std::chrono::milliseconds(a.at - clock_.now_ms()));
        }

        if (a.type == Action::Type::Ingest) {
            ingest_event(events_.at(a.event_index));
            continue;
        }

        // Concurrent mode: gather same-instant work for distinct tasks and
        // overlap their process invocations; bookkeeping stays serialized.
        if (settings_.engine.workers > 1) {
            std::vector<std::string> batch{a.task};
            while (!queue_.empty() && queue_.top().type == Action::Type::TryExec &&
                   queue_.top().at <= clock_.now_ms() &&
                   static_cast<int>(batch.size()) < settings_.engine.workers) {
                const std::string& t = queue_.top().task;
                if (std::find(batch.begin(), batch.end(), t) != batch.end()) break;
                batch.push_back(t);
                queue_.pop();
            }
            if (batch.size() > 1) {
                std::vector<PreparedExec> preps;
                for (const auto& t : batch) {
                    TaskState& ts = tasks_.at(t);
                    if (ts.pending.empty()) continue;
                    PreparedExec p = prepare_exec(ts, true);
                    if (p.kind == PreparedExec::Kind::Deferred) {
                        schedule(Action{p.retry_at, 0, Action::Type::TryExec, 0, t});
                        continue;
                    }
                    preps.push_back(std::move(p));
                }
                std::vector<std::future<ProcessResult>> futures(preps.size());
                for (size_t i = 0; i < preps.size(); ++i)
                    if (preps[i].kind == PreparedExec::Kind::Invoke)
                        futures[i] = std::async(std::launch::async, run_process,
                                                preps[i].argv, preps[i].workdir,
                                                preps[i].env);
                for (size_t i = 0; i < preps.size(); ++i) {
                    if (preps[i].kind == PreparedExec::Kind::Invoke) {
                        ProcessResult pr = futures[i].get();
                        finalize_exec(preps[i], &pr);
                    } else {
                        finalize_exec(preps[i], nullptr);
                    }
                    // More work for this task continues on the queue.
                    const std::string& t = preps[i].ts->decl->name;
                    if (!preps[i].ts->pending.empty())
                        schedule(Action{clock_.now_ms(), 0, Action::Type::TryExec, 0, t});
                }
                continue;
            }
        }
        process_pending(a.task, true);
    }
}

void Engine::ingest_event(const SourceEvent& ev) {
    std::string payload;
    if (!ghost_) {
        std::ifstream f(ev.payload_path, std::ios::binary);
        if (!f) throw Error("source payload not readable: " + ev.payload_path);
        std::ostringstream ss;
        ss << f.rdbuf();
        payload = ss.str();
    }
    ingest_value(ev.wire, payload, ghost_);
}

AnnotatedValue Engine::ingest_value(const std::string& wire, const std::string& payload,
                                    bool ghost) {
    std::string uri = ghost ? "" : store_->put(payload, EvictionClass::Source);
    AnnotatedValue av = avs_.mint("", wire, uri, "source", ghost);
    int64_t ordinal = source_ordinals_[wire]++;
    av.origin = ingest_counter_++;
    av.lineage = "s:" + wire + ":" + std::to_string(ordinal);
    avs_.adopt(av);
    latest_on_wire_[wire].push_back(av);

    ProvenanceEvent pe;
    pe.at = clock_.now_ms();
    pe.kind = EventKind::Ingest;
    pe.wire = wire;
    pe.av = av.id;
    if (!uri.empty()) pe.extra["uri"] = uri;
    pe.extra["ordinal"] = ordinal;
    pe.extra["ghost"] = ghost;
    pe.extra["origin"] = av.origin;
    pe.extra["lineage"] = av.lineage;
    pe.extra["logical"] = av.created_logical;
    pe.extra["code_version"] = av.code_version;
    registry_->append(std::move(pe));

    deliver(av);
    return av;
}

void Engine::deliver(const AnnotatedValue& av) {
    auto it = consumers_.find(av.wire);
    if (it == consumers_.end() || it->second.empty()) {
        report_.terminal.push_back({av.wire, av.id, av.payload_ref});
        return;
    }
    std::vector<std::string> touched;
    for (const auto& [task, slot] : it->second) {
        TaskState& ts = tasks_.at(task);
        if (static_cast<int64_t>(ts.link.backlog(slot)) >= settings_.engine.queue_capacity)
            throw CapacityError("queue capacity exceeded: task '" + task + "' slot '" +
                                av.wire + "' holds " +
                                std::to_string(ts.link.backlog(slot)) + " values (capacity " +
                                std::to_string(settings_.engine.queue_capacity) + ")");
        ts.link.enqueue(slot, av, clock_.now_ms());

        ProvenanceEvent pe;
        pe.at = clock_.now_ms();
        pe.kind = EventKind::Enqueue;
        pe.task = task;
        pe.wire = av.wire;
        pe.av = av.id;
        registry_->append(std::move(pe));

        report_.routing.push_back({av.lineage, av.wire, task});
        if (std::find(touched.begin(), touched.end(), task) == touched.end())
            touched.push_back(task);
    }
    for (const auto& task : touched) admit_snapshots(task);
}

int64_t Engine::snapshot_origin(const Snapshot& snap) const {
    int64_t origin = 0;
    for (const auto& buf : snap.slots)
        for (const auto& av : buf) origin = std::max(origin, av.origin);
    return origin;
}

void Engine::admit_snapshots(const std::string& task) {
    TaskState& ts = tasks_.at(task);
    while (auto snap = ts.link.try_assemble(clock_.now_ms())) {
        int64_t origin = snapshot_origin(*snap);
        if (ts.in_cycle) {
            int& passes = ts.per_origin_execs[origin];
            if (passes >= settings_.engine.max_cycle_iterations) {
                ts.suppressed += 1;
                report_.cycle_suppressed[task] += 1;
                continue;
            }
            passes += 1;
        }

        ProvenanceEvent pe;
        pe.at = clock_.now_ms();
        pe.kind = EventKind::Assemble;
        pe.task = task;
        pe.key = snap->key;
        for (const auto& buf : snap->slots)
            for (const auto& av : buf) pe.inputs.push_back(av.id);
        pe.extra["policy"] = to_string(ts.link.policy().mode);
        registry_->append(std::move(pe));

        report_.snapshots[task] += 1;
        ts.pending.push_back(std::move(*snap));
        schedule(Action{clock_.now_ms(), 0, Action::Type::TryExec, 0, task});
    }
}

void Engine::process_pending(const std::string& task, bool rate_control) {
    TaskState& ts = tasks_.at(task);
    while (!ts.pending.empty()) {
        PreparedExec prep = prepare_exec(ts, rate_control);
        if (prep.kind == PreparedExec::Kind::Deferred) {
            schedule(Action{prep.retry_at, 0, Action::Type::TryExec, 0, task});
            return;
        }
        if (prep.kind == PreparedExec::Kind::Invoke) {
            ProcessResult pr = run_process(prep.argv, prep.workdir, prep.env);
            finalize_exec(prep, &pr);
        } else {
            finalize_exec(prep, nullptr);
        }
    }
}

Engine::PreparedExec Engine::prepare_exec(TaskState& ts, bool rate_control) {
    PreparedExec prep;
    prep.ts = &ts;
    const Snapshot& snap = ts.pending.front();
    const std::string& task = ts.decl->name;
    TimestampMs now = clock_.now_ms();

    auto collect_inputs = [&](const Snapshot& s) {
        std::vector<std::vector<std::string>> ids;
        for (const auto& buf : s.slots) {
            std::vector<std::string> slot_ids;
            for (const auto& av : buf) slot_ids.push_back(av.id);
            ids.push_back(std::move(slot_ids));
        }
        return ids;
    };

    // Ghost snapshots skip lookups, cache, and user code entirely.
    if (ghost_ || snap.ghost()) {
        prep.kind = PreparedExec::Kind::Ghost;
        prep.snap = snap;
        ts.pending.pop_front();
        prep.exec_n = ++ts.exec_n;
        prep.origin = snapshot_origin(prep.snap);
        prep.input_ids = collect_inputs(prep.snap);
        prep.started = now;
        return prep;
    }

    // Consult implicit dependencies first: their digests are key components.
    std::vector<std::pair<std::string, std::string>> digests;
    std::vector<std::pair<std::string, std::string>> lookup_uris;
    for (const auto& slot : ts.decl->inputs) {
        if (!slot.implicit) continue;
        auto ait = settings_.implicits.find(slot.wire);
        if (ait == settings_.implicits.end())
            throw ServiceError("no adapter registered for implicit wire '" + slot.wire +
                               "' needed by task '" + task + "'");
        std::string request;
        if (!ait->second.request_slot.empty()) {
            for (size_t i = 0; i < ts.decl->inputs.size(); ++i) {
                if (ts.decl->inputs[i].wire == ait->second.request_slot &&
                    !ts.decl->inputs[i].implicit && !snap.slots[i].empty()) {
                    request = store_->fetch(snap.slots[i].front());
                    break;
                }
            }
        }
        ImplicitOutcome outcome =
            resolve_implicit(ait->second, request, *store_, scratch_ / task / "implicit");
        digests.emplace_back(slot.wire, outcome.digest);
        lookup_uris.emplace_back(slot.wire, outcome.uri);
    }

    CacheKeyParts parts;
    parts.task = task;
    parts.code_version = ts.config.code_version;
    for (const auto& buf : snap.slots) {
        std::vector<std::string> uris;
        for (const auto& av : buf) uris.push_back(av.payload_ref);
        parts.slot_uris.push_back(std::move(uris));
    }
    for (const auto& [w, d] : digests) parts.implicit_digests.push_back(d);
    std::string key = cache_key(parts);

    auto log_lookups = [&](int64_t exec_n) {
        for (size_t i = 0; i < digests.size(); ++i) {
            ProvenanceEvent pe;
            pe.at = clock_.now_ms();
            pe.kind = EventKind::ImplicitLookup;
            pe.task = task;
            pe.wire = digests[i].first;
            pe.key = digests[i].second;
            pe.extra["exec_n"] = exec_n;
            pe.extra["uri"] = lookup_uris[i].second;
            registry_->append(std::move(pe));
        }
    };

    if (auto hit = cache_.lookup(key, *store_)) {
        prep.kind = PreparedExec::Kind::CacheHit;
        prep.snap = snap;
        ts.pending.pop_front();
        prep.exec_n = ++ts.exec_n;
        prep.origin = snapshot_origin(prep.snap);
        prep.input_ids = collect_inputs(prep.snap);
        log_lookups(prep.exec_n);
        prep.implicit_digests = std::move(digests);
        prep.cache_key = key;
        prep.hit = std::move(*hit);
        prep.started = now;
        return prep;
    }

    // Rate control guards real invocations only; nothing has been consumed
    // or logged yet, so deferral leaves no trace and retries cleanly.
    if (rate_control && ts.config.min_execution_interval_ms > 0 && ts.last_invocation &&
        now < *ts.last_invocation + ts.config.min_execution_interval_ms) {
        prep.kind = PreparedExec::Kind::Deferred;
        prep.retry_at = *ts.last_invocation + ts.config.min_execution_interval_ms;
        return prep;
    }

    if (ts.config.exec.empty())
        throw ConfigError("task '" + task + "' has no program configured (exec)");

    prep.kind = PreparedExec::Kind::Invoke;
    prep.snap = snap;
    ts.pending.pop_front();
    prep.exec_n = ++ts.exec_n;
    prep.origin = snapshot_origin(prep.snap);
    prep.input_ids = collect_inputs(prep.snap);
    log_lookups(prep.exec_n);
    prep.implicit_digests = std::move(digests);
    prep.cache_key = key;

    prep.workdir = scratch_ / task / ("e" + std::to_string(prep.exec_n));
    std::vector<fs::path> in_paths =
        materialize(prep.snap, ts.decl->inputs, *store_, prep.workdir);
    fs::create_directories(prep.workdir);
    prep.argv = ts.config.exec;
    for (const auto& p : in_paths) prep.argv.push_back(p.string());
    for (const auto& out : ts.decl->outputs) {
        fs::path op = prep.workdir / (out.wire + ".out");
        prep.out_paths.push_back(op);
        prep.argv.push_back(op.string());
    }
    prep.env = {{kEnvSnapshotKey, prep.snap.key},
                {kEnvInputCount, std::to_string(in_paths.size())},
                {kEnvOutputCount, std::to_string(prep.out_paths.size())}};

    ProvenanceEvent pe;
    pe.at = now;
    pe.kind = EventKind::ExecStart;
    pe.task = task;
    pe.key = prep.snap.key;
    for (const auto& ids : prep.input_ids)
        for (const auto& id : ids) pe.inputs.push_back(id);
    pe.extra["exec_n"] = prep.exec_n;
    pe.extra["code_version"] = ts.config.code_version;
    pe.extra["cache_key"] = key;
    registry_->append(std::move(pe));

    prep.started = now;
    return prep;
}

std::vector<AnnotatedValue> Engine::mint_outputs(TaskState& ts, int64_t exec_n,
                                                 const std::vector<std::string>& uris,
                                                 bool ghost, int64_t origin) {
    std::vector<AnnotatedValue> out;
    const std::string& task = ts.decl->name;
    for (size_t i = 0; i < ts.decl->outputs.size(); ++i) {
        const auto& decl = ts.decl->outputs[i];
        std::string uri = ghost ? std::string() : uris.at(i);
        AnnotatedValue av = avs_.mint(task, decl.wire, uri, ts.config.code_version, ghost);
        av.origin = origin;
        av.lineage = "x:" + task + ":" + std::to_string(exec_n) + ":" + decl.wire;
        avs_.adopt(av);
        latest_on_wire_[decl.wire].push_back(av);

        ProvenanceEvent pe;
        pe.at = clock_.now_ms();
        pe.kind = EventKind::Mint;
        pe.task = task;
        pe.wire = decl.wire;
        pe.av = av.id;
        if (!uri.empty()) pe.extra["uri"] = uri;
        pe.extra["ghost"] = ghost;
        pe.extra["origin"] = origin;
        pe.extra["lineage"] = av.lineage;
        pe.extra["logical"] = av.created_logical;
        pe.extra["code_version"] = av.code_version;
        pe.extra["exec_n"] = exec_n;
        registry_->append(std::move(pe));

        out.push_back(std::move(av));
    }
    return out;
}

void Engine::finalize_exec(PreparedExec& prep, const ProcessResult* pr) {
    TaskState& ts = *prep.ts;
    const std::string& task = ts.decl->name;
    TimestampMs now = clock_.now_ms();

    ExecutionRecord rec;
    rec.task = task;
    rec.exec_n = prep.exec_n;
    rec.snapshot_key = prep.snap.key;
    rec.cache_key = prep.cache_key;
    rec.input_ids = prep.input_ids;
    rec.implicit_digests = prep.implicit_digests;
    rec.code_version = ts.config.code_version;
    rec.started = prep.started;
    rec.finished = now;

    std::vector<AnnotatedValue> outputs;

    if (prep.kind == PreparedExec::Kind::Ghost) {
        rec.ghost = true;
        outputs = mint_outputs(ts, prep.exec_n, {}, true, prep.origin);

        ProvenanceEvent pe;
        pe.at = now;
        pe.kind = EventKind::ExecEnd;
        pe.task = task;
        for (const auto& av : outputs) pe.outputs.push_back(av.id);
        pe.extra["exec_n"] = prep.exec_n;
        pe.extra["snapshot_key"] = prep.snap.key;
        pe.extra["ghost"] = true;
        pe.extra["exit"] = 0;
        pe.extra["duration_ms"] = int64_t{0};
        registry_->append(std::move(pe));
    } else if (prep.kind == PreparedExec::Kind::CacheHit) {
        rec.cached = true;
        outputs = mint_outputs(ts, prep.exec_n, prep.hit.output_uris, false, prep.origin);

        ProvenanceEvent pe;
        pe.at = now;
        pe.kind = EventKind::CacheHit;
        pe.task = task;
        for (const auto& ids : prep.input_ids)
            for (const auto& id : ids) pe.inputs.push_back(id);
        for (const auto& av : outputs) pe.outputs.push_back(av.id);
        pe.key = prep.cache_key;
        pe.extra["exec_n"] = prep.exec_n;
        pe.extra["snapshot_key"] = prep.snap.key;
        pe.extra["output_uris"] = prep.hit.output_uris;
        registry_->append(std::move(pe));
    } else {
        rec.exit_status = pr->exit_code;
        rec.stderr_text = pr->stderr_text;
        ts.last_invocation = prep.started;
        int64_t duration = now - prep.started;

        std::string stderr_short = pr->stderr_text.substr(0, 256);
        if (pr->exit_code != 0) {
            ProvenanceEvent pe;
            pe.at = now;
            pe.kind = EventKind::ExecEnd;
            pe.task = task;
            pe.key = prep.cache_key;
            pe.extra["exec_n"] = prep.exec_n;
            pe.extra["snapshot_key"] = prep.snap.key;
            pe.extra["exit"] = pr->exit_code;
            pe.extra["duration_ms"] = duration;
            if (!stderr_short.empty()) pe.extra["stderr"] = stderr_short;
            registry_->append(std::move(pe));
            report_.executions.push_back(std::move(rec));
            return; // failed: nothing minted, downstream sees no arrival
        }

        size_t populated_slots = 0;
        for (const auto& buf : prep.snap.slots)
            if (!buf.empty()) ++populated_slots;
        EvictionClass cls = populated_slots > 1 ? EvictionClass::IntermediateCombined
                                                : EvictionClass::IntermediateSimple;
        std::vector<std::string> uris;
        for (size_t i = 0; i < prep.out_paths.size(); ++i) {
            std::ifstream f(prep.out_paths[i], std::ios::binary);
            if (!f)
                throw Error("task '" + task + "': program wrote no output for wire '" +
                            ts.decl->outputs[i].wire + "'");
            std::ostringstream ss;
            ss << f.rdbuf();
            uris.push_back(store_->put(ss.str(), cls));
        }
        outputs = mint_outputs(ts, prep.exec_n, uris, false, prep.origin);

        ProvenanceEvent pe;
        pe.at = now;
        pe.kind = EventKind::ExecEnd;
        pe.task = task;
        for (const auto& av : outputs) pe.outputs.push_back(av.id);
        pe.key = prep.cache_key;
        pe.extra["exec_n"] = prep.exec_n;
        pe.extra["snapshot_key"] = prep.snap.key;
        pe.extra["exit"] = 0;
        pe.extra["duration_ms"] = duration;
        pe.extra["output_uris"] = uris;
        if (!stderr_short.empty()) pe.extra["stderr"] = stderr_short;
        registry_->append(std::move(pe));

        cache_.insert(prep.cache_key, ExecutionCache::Entry{uris});
    }

    for (const auto& av : outputs) rec.outputs.emplace_back(av.wire, av.id);
    report_.executions.push_back(std::move(rec));
    if (!pull_mode_)
        for (const auto& av : outputs) deliver(av);
}

void Engine::finish_report(RunReport& report) {
    for (const auto& [name, ts] : tasks_) {
        report.push_channel[name] =
            should_notify(ts.link, ts.config.service_time_ms,
                          settings_.engine.notify_threshold,
                          settings_.engine.notify_default);
    }
}

// ---------------------------------------------------------------------------
// Pull mode.

std::optional<Snapshot> Engine::build_pull_snapshot(TaskState& ts) {
    Snapshot snap;
    snap.slots.resize(ts.decl->inputs.size());
    for (size_t i = 0; i < ts.decl->inputs.size(); ++i) {
        const auto& slot = ts.decl->inputs[i];
        if (slot.implicit) continue;
        size_t need = static_cast<size_t>(slot.required());
        const auto& hist = latest_on_wire_[slot.wire];
        if (hist.size() < need) return std::nullopt;
        snap.slots[i].assign(hist.end() - static_cast<ptrdiff_t>(need), hist.end());
    }
    snap.assembled_at = clock_.now_ms();
    snap.key = snapshot_key(snap.slots);
    return snap;
}

void Engine::pull_task_once(TaskState& ts) {
    auto snap = build_pull_snapshot(ts);
    if (!snap) {
        for (const auto& slot : ts.decl->inputs) {
            if (slot.implicit) continue;
            if (latest_on_wire_[slot.wire].size() <
                static_cast<size_t>(slot.required()))
                throw NotFoundError("pull: missing value on wire '" + slot.wire +
                                    "' required by task '" + ts.decl->name + "'");
        }
        throw NotFoundError("pull: cannot assemble inputs for task '" +
                            ts.decl->name + "'");
    }

    ProvenanceEvent pe;
    pe.at = clock_.now_ms();
    pe.kind = EventKind::Assemble;
    pe.task = ts.decl->name;
    pe.key = snap->key;
    for (const auto& buf : snap->slots)
        for (const auto& av : buf) pe.inputs.push_back(av.id);
    pe.extra["policy"] = "pull";
    registry_->append(std::move(pe));

    report_.snapshots[ts.decl->name] += 1;
    ts.pending.push_back(std::move(*snap));
    process_pending(ts.decl->name, false);
}

RunReport Engine::run_pull(const std::string& target) {
    report_ = RunReport{};
    report_.mode = "pull";
    report_.seed = settings_.engine.seed;
    pull_mode_ = true;
    struct Reset {
        bool* flag;
        ~Reset() { *flag = false; }
    } reset{&pull_mode_};

    // Resolve the target to a producing task, or to a source wire.
    std::string target_task;
    std::vector<std::string> terminal_wires;
    if (const TaskDecl* t = spec_.find_task(target)) {
        target_task = t->name;
        for (const auto& o : t->outputs) terminal_wires.push_back(o.wire);
    } else if (producer_.count(target)) {
        target_task = producer_[target];
        terminal_wires.push_back(target);
    } else {
        bool known_wire = false;
        for (const auto& w : spec_.wires) known_wire = known_wire || w.wire == target;
        for (const auto& t2 : spec_.tasks)
            for (const auto& s : t2.inputs) known_wire = known_wire || s.wire == target;
        if (!known_wire)
            throw NotFoundError("pull: unknown target '" + target + "'");
        // Source wire: answer with its current value; nothing to compute.
        const auto& hist = latest_on_wire_[target];
        if (hist.empty())
            throw NotFoundError("pull: no current value on source wire '" + target + "'");
        report_.terminal.push_back({target, hist.back().id, hist.back().payload_ref});
        finish_report(report_);
        return report_;
    }

    // Ancestor closure over stream edges (implicit needs are met by
    // adapters, not by pulling their producers).
    std::set<std::string> ancestors{target_task};
    std::vector<std::string> frontier{target_task};
    while (!frontier.empty()) {
        std::vector<std::string> next;
        for (const auto& name : frontier) {
            const TaskDecl* decl = spec_.find_task(name);
            for (const auto& slot : decl->inputs) {
                if (slot.implicit) continue;
                auto pit = producer_.find(slot.wire);
                if (pit != producer_.end() && ancestors.insert(pit->second).second)
                    next.push_back(pit->second);
            }
        }
        frontier = std::move(next);
    }

    // Condense to strongly connected components and order them source-first.
    // Deterministic: tasks keep declaration order throughout.
    std::vector<std::string> ordered_tasks;
    for (const auto& t : spec_.tasks)
        if (ancestors.count(t.name)) ordered_tasks.push_back(t.name);

    auto stream_inputs_from = [&](const std::string& name) {
        std::set<std::string> from;
        const TaskDecl* decl = spec_.find_task(name);
        for (const auto& slot : decl->inputs) {
            if (slot.implicit) continue;
            auto pit = producer_.find(slot.wire);
            if (pit != producer_.end() && ancestors.count(pit->second))
                from.insert(pit->second);
        }
        return from;
    };

    // Reachability-based SCC grouping (graphs here are task-count small).
    auto reaches = [&](const std::string& from, const std::string& to) {
        std::set<std::string> seen;
        std::vector<std::string> fr{from};
        while (!fr.empty()) {
            std::vector<std::string> nx;
            for (const auto& f : fr) {
                const TaskDecl* decl = spec_.find_task(f);
                for (const auto& o : decl->outputs) {
                    if (o.implicit) continue;
                    auto cit = consumers_.find(o.wire);
                    if (cit == consumers_.end()) continue;
                    for (const auto& [c, slot] : cit->second) {
                        if (c == to) return true;
                        if (ancestors.count(c) && seen.insert(c).second) nx.push_back(c);
                    }
                }
            }
            fr = std::move(nx);
        }
        return false;
    };

    std::vector<std::vector<std::string>> components;
    std::set<std::string> assigned;
    for (const auto& name : ordered_tasks) {
        if (assigned.count(name)) continue;
        std::vector<std::string> comp{name};
        assigned.insert(name);
        for (const auto& other : ordered_tasks) {
            if (assigned.count(other)) continue;
            if (reaches(name, other) && reaches(other, name)) {
                comp.push_back(other);
                assigned.insert(other);
            }
        }
        components.push_back(std::move(comp));
    }

    // Topologically order components (Kahn; stable by first member's
    // declaration position).
    auto comp_of = [&](const std::string& name) {
        for (size_t i = 0; i < components.size(); ++i)
            for (const auto& m : components[i])
                if (m == name) return i;
        return components.size();
    };
    std::vector<std::set<size_t>> comp_deps(components.size());
    for (size_t i = 0; i < components.size(); ++i)
        for (const auto& m : components[i])
            for (const auto& from : stream_inputs_from(m)) {
                size_t j = comp_of(from);
                if (j != i) comp_deps[i].insert(j);
            }
    std::vector<size_t> order;
    std::set<size_t> done;
    while (order.size() < components.size()) {
        bool progressed = false;
        for (size_t i = 0; i < components.size(); ++i) {
            if (done.count(i)) continue;
            bool ready = true;
            for (size_t j : comp_deps[i]) ready = ready && done.count(j);
            if (ready) {
                order.push_back(i);
                done.insert(i);
                progressed = true;
            }
        }
        if (!progressed) throw Error("pull: component ordering failed");
    }

    for (size_t ci : order) {
        const auto& comp = components[ci];
        bool cyclic = comp.size() > 1 ||
                      stream_inputs_from(comp[0]).count(comp[0]) > 0;
        if (!cyclic) {
            pull_task_once(tasks_.at(comp[0]));
            continue;
        }
        // Cyclic component: iterate members (declaration order) until keys
        // stop changing or the budget runs out. Requires a seed value on
        // some in-component wire from a previous run.
        std::map<std::string, std::string> last_key;
        bool seeded = false;
        for (const auto& m : comp)
            if (build_pull_snapshot(tasks_.at(m))) seeded = true;
        if (!seeded)
            throw Error("pull: cycle through task '" + comp[0] +
                        "' has no seed value; run reactive mode first");
        for (int pass = 0; pass < settings_.engine.max_cycle_iterations; ++pass) {
            bool changed = false;
            for (const auto& m : comp) {
                TaskState& ts = tasks_.at(m);
                auto snap = build_pull_snapshot(ts);
                if (!snap) continue;
                auto lit = last_key.find(m);
                if (lit != last_key.end() && lit->second == snap->key) continue;
                last_key[m] = snap->key;
                pull_task_once(ts);
                changed = true;
            }
            if (!changed) break;
        }
    }

    for (const auto& w : terminal_wires) {
        const auto& hist = latest_on_wire_[w];
        if (!hist.empty())
            report_.terminal.push_back({w, hist.back().id, hist.back().payload_ref});
    }
    finish_report(report_);
    return report_;
}

// ---------------------------------------------------------------------------
// Triggers.

std::set<std::string> Engine::forward_tasks(const std::set<std::string>& seeds) const {
    // Forward closure over both stream and implicit edges.
    std::set<std::string> stale = seeds;
    std::vector<std::string> frontier(seeds.begin(), seeds.end());
    while (!frontier.empty()) {
        std::vector<std::string> next;
        for (const auto& name : frontier) {
            const TaskDecl* decl = spec_.find_task(name);
            for (const auto& o : decl->outputs) {
                auto cit = consumers_.find(o.wire);
                if (cit != consumers_.end())
                    for (const auto& [c, slot] : cit->second)
                        if (stale.insert(c).second) next.push_back(c);
                for (const auto& t : spec_.tasks)
                    for (const auto& s : t.inputs)
                        if (s.implicit && s.wire == o.wire && stale.insert(t.name).second)
                            next.push_back(t.name);
            }
        }
        frontier = std::move(next);
    }
    return stale;
}

InvalidationReport Engine::apply_trigger(const UpdateTrigger& trigger) {
    InvalidationReport report;
    report.kind = trigger.kind;
    report.subject = trigger.subject;

    ProvenanceEvent pe;
    pe.at = clock_.now_ms();
    pe.kind = EventKind::Trigger;
    pe.extra["trigger"] = to_string(trigger.kind);
    pe.extra["subject"] = trigger.subject;

    switch (trigger.kind) {
    case TriggerKind::SoftwareUpdate: {
        auto it = tasks_.find(trigger.subject);
        if (it == tasks_.end())
            throw NotFoundError("software_update: unknown task '" + trigger.subject + "'");
        if (trigger.new_version.empty())
            throw ConfigError("software_update: new_version must be nonempty");
        it->second.config.code_version = trigger.new_version;
        settings_.tasks[trigger.subject].code_version = trigger.new_version;
        auto stale = forward_tasks({trigger.subject});
        report.stale.assign(stale.begin(), stale.end());
        pe.extra["code_version"] = trigger.new_version;
        break;
    }
    case TriggerKind::ServiceUpdate: {
        std::set<std::string> seeds;
        for (const auto& t : spec_.tasks)
            for (const auto& s : t.inputs)
                if (s.implicit && s.wire == trigger.subject) seeds.insert(t.name);
        if (seeds.empty())
            throw NotFoundError("service_update: no task consumes wire '" +
                                trigger.subject + "' implicitly");
        auto stale = forward_tasks(seeds);
        report.stale.assign(stale.begin(), stale.end());
        break;
    }
    case TriggerKind::SampleUpdate: {
        bool is_source = !producer_.count(trigger.subject) &&
                         consumers_.count(trigger.subject);
        if (!is_source)
            throw NotFoundError("sample_update: '" + trigger.subject +
                                "' is not a source wire");
        std::set<std::string> seeds;
        for (const auto& [task, slot] : consumers_.at(trigger.subject))
            seeds.insert(task);
        AnnotatedValue av = ingest_value(trigger.subject, trigger.payload, ghost_);
        report.injected_av = av.id;
        auto stale = forward_tasks(seeds);
        report.stale.assign(stale.begin(), stale.end());
        break;
    }
    }

    pe.extra["stale"] = report.stale;
    if (!report.injected_av.empty()) pe.extra["av"] = report.injected_av;
    registry_->append(std::move(pe));
    return report;
}

// ---------------------------------------------------------------------------
// Resume.

void Engine::adopt_registry_values() {
    int64_t prior_values = 0;
    for (const auto& ev : registry_->events()) {
        if (ev.kind == EventKind::Ingest || ev.kind == EventKind::Mint) ++prior_values;
    }
    // Continue the id stream past everything already minted. Under the same
    // seed this resumes the original sequence exactly; under a different
    // seed the streams are disjoint for all practical purposes either way.
    for (int64_t i = 0; i < prior_values; ++i) ids_.next();

    for (const auto& ev : registry_->events()) {
        if (ev.kind == EventKind::Ingest || ev.kind == EventKind::Mint) {
            AnnotatedValue av;
            av.id = ev.av;
            av.source_task = ev.kind == EventKind::Mint ? ev.task : "";
            av.wire = ev.wire;
            av.payload_ref = ev.extra.value("uri", "");
            av.created_wall = ev.at;
            av.created_logical = ev.extra.value("logical", int64_t{0});
            av.code_version = ev.extra.value("code_version", "source");
            av.ghost = ev.extra.value("ghost", false);
            av.origin = ev.extra.value("origin", int64_t{0});
            av.lineage = ev.extra.value("lineage", "");
            avs_.adopt(av);
            latest_on_wire_[av.wire].push_back(av);
            if (ev.kind == EventKind::Ingest) {
                int64_t ordinal = ev.extra.value("ordinal", int64_t{0});
                auto& next = source_ordinals_[av.wire];
                next = std::max(next, ordinal + 1);
                ingest_counter_ = std::max(ingest_counter_, av.origin + 1);
            }
        } else if (ev.kind == EventKind::ExecEnd) {
            if (ev.extra.value("exit", -1) == 0 && !ev.extra.value("ghost", false) &&
                ev.extra.contains("output_uris"))
                cache_.insert(ev.key, ExecutionCache::Entry{
                                          ev.extra["output_uris"]
                                              .get<std::vector<std::string>>()});
            auto it = tasks_.find(ev.task);
            if (it != tasks_.end())
                it->second.exec_n =
                    std::max(it->second.exec_n, ev.extra.value("exec_n", int64_t{0}));
        } else if (ev.kind == EventKind::ExecStart || ev.kind == EventKind::CacheHit) {
            auto it = tasks_.find(ev.task);
            if (it != tasks_.end())
                it->second.exec_n =
                    std::max(it->second.exec_n, ev.extra.value("exec_n", int64_t{0}));
        }
    }
}

void Engine::save_state(const fs::path& file) const {
    ordered_json j;
    j["format"] = "loom-engine-state";
    j["version"] = 1;
    j["clock_ms"] = clock_.now_ms();
    j["ids"] = ids_.save_state();
    j["ingest_counter"] = ingest_counter_;
    j["source_ordinals"] = source_ordinals_;

    ordered_json latest;
    for (const auto& [wire, avs] : latest_on_wire_) {
        std::vector<std::string> ids;
        for (const auto& av : avs) ids.push_back(av.id);
        latest[wire] = ids;
    }
    j["latest"] = latest;

    ordered_json tasks;
    for (const auto& [name, ts] : tasks_) {
        ordered_json tj;
        tj["exec_n"] = ts.exec_n;
        if (ts.last_invocation) tj["last_invocation"] = *ts.last_invocation;
        tj["code_version"] = ts.config.code_version;
        tj["suppressed"] = ts.suppressed;
        ordered_json origins;
        for (const auto& [origin, count] : ts.per_origin_execs)
            origins[std::to_string(origin)] = count;
        tj["per_origin_execs"] = origins;

        LinkState::Persist lp = ts.link.persist();
        ordered_json lj;
        lj["arrivals"] = lp.arrivals;
        lj["first_arrival"] = lp.first_arrival;
        lj["last_arrival"] = lp.last_arrival;
        lj["enqueue_seq"] = lp.enqueue_seq;
        lj["snapshots"] = lp.snapshots;
        ordered_json slots = ordered_json::array();
        for (const auto& sp : lp.slots) {
            ordered_json sj;
            ordered_json queue = ordered_json::array();
            for (const auto& qp : sp.queue)
                queue.push_back({{"id", qp.id}, {"arrived", qp.arrived}, {"seq", qp.seq}});
            sj["queue"] = queue;
            sj["history"] = sp.history;
            sj["history_base"] = sp.history_base;
            sj["windows_emitted"] = sp.windows_emitted;
            sj["last_consumed"] = sp.last_consumed;
            sj["has_last"] = sp.has_last;
            slots.push_back(std::move(sj));
        }
        lj["slots"] = std::move(slots);
        tj["link"] = std::move(lj);

        ordered_json pending = ordered_json::array();
        for (const auto& snap : ts.pending) {
            ordered_json sj;
            std::vector<std::vector<std::string>> ids;
            for (const auto& buf : snap.slots) {
                std::vector<std::string> slot_ids;
                for (const auto& av : buf) slot_ids.push_back(av.id);
                ids.push_back(std::move(slot_ids));
            }
            sj["slots"] = ids;
            sj["assembled_at"] = snap.assembled_at;
            sj["key"] = snap.key;
            pending.push_back(std::move(sj));
        }
        tj["pending"] = std::move(pending);
        tasks[name] = std::move(tj);
    }
    j["tasks"] = std::move(tasks);

    if (file.has_parent_path()) fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw Error("cannot write state file " + file.string());
    out << j.dump(2) << "\n";
}

void Engine::load_state(const fs::path& file) {
    std::ifstream in(file);
    if (!in) throw Error("cannot read state file " + file.string());
    ordered_json j;
    try {
        in >> j;
    } catch (const std::exception& e) {
        throw ConfigError("state file " + file.string() + ": " + e.what());
    }
    if (j.value("format", "") != "loom-engine-state")
        throw ConfigError("state file " + file.string() + ": wrong format");

    auto resolve = [&](const std::string& id) -> AnnotatedValue {
        const AnnotatedValue* av = avs_.find(id);
        if (!av)
            throw Error("resume: state references unknown value id '" + id +
                        "' (replay the registry first)");
        return *av;
    };

    clock_.advance_to(j.value("clock_ms", kSimEpochMs));
    ids_.load_state(j.value("ids", ""));
    ingest_counter_ = j.value("ingest_counter", int64_t{0});
    if (j.contains("source_ordinals"))
        source_ordinals_ =
            j["source_ordinals"].get<std::map<std::string, int64_t>>();

    if (j.contains("latest")) {
        latest_on_wire_.clear();
        for (const auto& [wire, ids] : j["latest"].items())
            for (const auto& id : ids.get<std::vector<std::string>>())
                latest_on_wire_[wire].push_back(resolve(id));
    }

    for (const auto& [name, tj] : j["tasks"].items()) {
        auto it = tasks_.find(name);
        if (it == tasks_.end())
            throw ConfigError("state file names unknown task '" + name + "'");
        TaskState& ts = it->second;
        ts.exec_n = tj.value("exec_n", int64_t{0});
        if (tj.contains("last_invocation"))
            ts.last_invocation = tj["last_invocation"].get<TimestampMs>();
        if (tj.contains("code_version")) {
            ts.config.code_version = tj["code_version"].get<std::string>();
            settings_.tasks[name].code_version = ts.config.code_version;
        }
        ts.suppressed = tj.value("suppressed", int64_t{0});
        ts.per_origin_execs.clear();
        if (tj.contains("per_origin_execs"))
            for (const auto& [origin, count] : tj["per_origin_execs"].items())
                ts.per_origin_execs[std::stoll(origin)] = count.get<int>();

        if (tj.contains("link")) {
            const auto& lj = tj["link"];
            LinkState::Persist lp;
            lp.arrivals = lj.value("arrivals", int64_t{0});
            lp.first_arrival = lj.value("first_arrival", TimestampMs{0});
            lp.last_arrival = lj.value("last_arrival", TimestampMs{0});
            lp.enqueue_seq = lj.value("enqueue_seq", int64_t{0});
            lp.snapshots = lj.value("snapshots", int64_t{0});
            for (const auto& sj : lj["slots"]) {
                LinkState::SlotPersist sp;
                for (const auto& qj : sj["queue"])
                    sp.queue.push_back(LinkState::QueuePersist{
                        qj["id"].get<std::string>(), qj["arrived"].get<TimestampMs>(),
                        qj["seq"].get<int64_t>()});
                sp.history = sj["history"].get<std::vector<std::string>>();
                sp.history_base = sj.value("history_base", int64_t{0});
                sp.windows_emitted = sj.value("windows_emitted", int64_t{0});
                sp.last_consumed = sj["last_consumed"].get<std::vector<std::string>>();
                sp.has_last = sj.value("has_last", false);
                lp.slots.push_back(std::move(sp));
            }
            ts.link.restore(lp, resolve);
        }

        ts.pending.clear();
        if (tj.contains("pending")) {
            for (const auto& sj : tj["pending"]) {
                Snapshot snap;
                for (const auto& ids : sj["slots"]) {
                    std::vector<AnnotatedValue> buf;
                    for (const auto& id : ids.get<std::vector<std::string>>())
                        buf.push_back(resolve(id));
                    snap.slots.push_back(std::move(buf));
                }
                snap.assembled_at = sj.value("assembled_at", TimestampMs{0});
                snap.key = sj.value("key", "");
                ts.pending.push_back(std::move(snap));
            }
            if (!ts.pending.empty())
                schedule(Action{clock_.now_ms(), 0, Action::Type::TryExec, 0, name});
        }
    }
}

} // namespace loom
