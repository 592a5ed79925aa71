#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "loom/config.hpp"
#include "loom/error.hpp"
#include "loom/manager.hpp"
#include "loom/provenance.hpp"
#include "loom/store.hpp"
#include "loom/wiring.hpp"

namespace {

using nlohmann::ordered_json;

// Exit codes: 0 success, 1 domain error (validation, run, trace failures),
// 2 usage or I/O error (bad flags, unreadable files).
constexpr int kOk = 0;
constexpr int kDomainError = 1;
constexpr int kUsageError = 2;

std::string slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        std::cerr << "loom: cannot read " << path << "\n";
        std::exit(kUsageError);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

std::string env_or(const char* var, const std::string& fallback) {
    const char* v = std::getenv(var);
    return v ? v : fallback;
}

loom::PipelineSpec parse_or_die(const std::string& path) {
    try {
        return loom::parse(slurp(path));
    } catch (const loom::ParseError& e) {
        std::cerr << "loom: " << path << ": " << e.what() << "\n";
        std::exit(kDomainError);
    }
}

int cmd_validate(const std::string& path, const std::string& format) {
    loom::PipelineSpec spec;
    std::string text = slurp(path);
    try {
        spec = loom::parse(text);
    } catch (const loom::ParseError& e) {
        if (format == "json") {
            ordered_json j;
            j["errors"] = 1;
            j["diagnostics"] = {{{"severity", "error"},
                                 {"code", "parse"},
                                 {"line", e.line},
                                 {"column", e.column},
                                 {"message", e.what()}}};
            std::cout << j.dump(2) << "\n";
        } else {
            std::cerr << "error: " << e.what() << "\n";
        }
        return kDomainError;
    }

    auto diags = loom::validate(spec);
    int errors = 0;
    for (const auto& d : diags)
        if (d.severity == loom::Severity::Error) ++errors;

    if (format == "json") {
        ordered_json j;
        j["pipeline"] = spec.name;
        j["tasks"] = spec.tasks.size();
        j["errors"] = errors;
        ordered_json list = ordered_json::array();
        for (const auto& d : diags) {
            const char* sev = d.severity == loom::Severity::Error     ? "error"
                              : d.severity == loom::Severity::Warning ? "warning"
                                                                      : "info";
            list.push_back({{"severity", sev},
                            {"code", d.code},
                            {"line", d.location.line},
                            {"column", d.location.column},
                            {"message", d.message}});
        }
        j["diagnostics"] = std::move(list);
        std::cout << j.dump(2) << "\n";
    } else {
        for (const auto& d : diags) std::cout << loom::render_diagnostic(d) << "\n";
        std::cout << (errors == 0 ? "ok" : "invalid") << ": " << spec.name << " ("
                  << spec.tasks.size() << " tasks, " << diags.size()
                  << " diagnostics)\n";
    }
    return errors == 0 ? kOk : kDomainError;
}

int cmd_graph(const std::string& path, const std::string& out) {
    loom::PipelineSpec spec = parse_or_die(path);
    auto diags = loom::validate(spec);
    if (loom::has_errors(diags)) {
        for (const auto& d : diags)
            if (d.severity == loom::Severity::Error)
                std::cerr << loom::render_diagnostic(d) << "\n";
        return kDomainError;
    }

    std::ostringstream dot;
    dot << "digraph \"" << spec.name << "\" {\n";
    dot << "  rankdir=LR;\n";
    for (const auto& t : spec.tasks) dot << "  \"" << t.name << "\";\n";
    for (const auto& w : spec.wires) {
        dot << "  \"" << w.from << "\" -> \"" << w.to << "\" [label=\"" << w.wire
            << "\"";
        if (w.implicit) dot << ", style=dashed";
        dot << "];\n";
    }
    for (const auto& src : spec.source_wires()) {
        dot << "  \"" << src << "\" [shape=plaintext];\n";
        for (const auto& [task, slot] : spec.consumers_of(src))
            dot << "  \"" << src << "\" -> \"" << task << "\" [label=\"" << src
                << "\"];\n";
    }
    dot << "}\n";

    if (out.empty() || out == "-") {
        std::cout << dot.str();
    } else {
        std::ofstream f(out, std::ios::trunc);
        if (!f) {
            std::cerr << "loom: cannot write " << out << "\n";
            return kUsageError;
        }
        f << dot.str();
    }
    return kOk;
}

struct RunFlags {
    std::string pipeline;
    std::string mode = "reactive";
    std::string target;
    std::string events_file;
    std::string config_file;
    std::string store_dir;
    std::string registry_file;
    std::string report_file = "report.jsonl";
    std::string resume_file;
    std::string save_state_file;
    std::string format = "text";
    bool ghost = false;
    bool wall = false;
    std::optional<int64_t> seed;
    std::optional<int> workers;
    std::optional<int64_t> max_events;
    std::optional<int64_t> deadline_ms;
};

int cmd_run(const RunFlags& flags) {
    loom::PipelineSpec spec = parse_or_die(flags.pipeline);

    loom::RunSettings settings;
    try {
        settings = flags.config_file.empty()
                       ? loom::default_run_settings(spec)
                       : loom::load_run_settings(flags.config_file, spec);
    } catch (const loom::Error& e) {
        std::cerr << "loom: " << e.what() << "\n";
        return kDomainError;
    }
    for (const auto& w : settings.warnings) std::cerr << "warning: " << w << "\n";

    // Flags override file settings.
    if (flags.seed) settings.engine.seed = *flags.seed;
    if (flags.workers) settings.engine.workers = *flags.workers;
    if (flags.wall) settings.engine.deterministic = false;

    std::string store_dir = flags.store_dir.empty()
                                ? env_or("LOOM_STORE", "loom-store")
                                : flags.store_dir;
    std::string registry_file = flags.registry_file.empty()
                                    ? env_or("LOOM_REGISTRY", store_dir + "/registry.jsonl")
                                    : flags.registry_file;
    if (registry_file == store_dir) {
        std::cerr << "loom: store and registry paths must differ\n";
        return kUsageError;
    }

    try {
        static loom::Clock boot_clock(false);
        loom::ContentStore store(store_dir, loom::StorePolicy{}, &boot_clock);
        loom::Registry registry(registry_file);
        loom::Engine engine(spec, settings, store, registry, flags.ghost);

        // The registry is the state between invocations: replaying it
        // restores value metadata and the result cache, so a rerun over
        // unchanged payloads hits instead of recomputing.
        engine.adopt_registry_values();
        if (!flags.resume_file.empty()) engine.load_state(flags.resume_file);

        loom::RunReport report;
        if (flags.mode == "reactive") {
            std::vector<loom::SourceEvent> events;
            if (!flags.events_file.empty())
                events = loom::parse_event_file(flags.events_file);
            loom::StopCondition stop;
            if (flags.deadline_ms)
                stop.deadline_ms = engine.clock().now_ms() + *flags.deadline_ms;
            stop.max_source_events = flags.max_events;
            report = engine.run_reactive(std::move(events), stop);
        } else if (flags.mode == "pull") {
            if (flags.target.empty()) {
                std::cerr << "loom: --mode pull requires --target\n";
                return kUsageError;
            }
            report = engine.run_pull(flags.target);
        } else {
            std::cerr << "loom: unknown mode '" << flags.mode << "'\n";
            return kUsageError;
        }

        if (!flags.save_state_file.empty()) engine.save_state(flags.save_state_file);

        if (!flags.report_file.empty() && flags.report_file != "-") {
            std::ofstream rf(flags.report_file, std::ios::trunc);
            if (!rf) {
                std::cerr << "loom: cannot write " << flags.report_file << "\n";
                return kUsageError;
            }
            report.write_jsonl(rf);
        }

        if (flags.format == "json") {
            report.write_jsonl(std::cout);
            return kOk;
        }

        int64_t cache_hits = 0, failures = 0, ghosts = 0;
        for (const auto& rec : report.executions) {
            if (rec.cached) ++cache_hits;
            if (rec.ghost) ++ghosts;
            if (rec.exit_status && *rec.exit_status != 0) ++failures;
        }
        std::cout << "mode: " << report.mode << "\n";
        std::cout << "source events: " << report.source_events << "\n";
        std::cout << "executions: " << report.executions.size() << " ("
                  << report.invocations() << " invoked, " << cache_hits << " cached, "
                  << ghosts << " ghost, " << failures << " failed)\n";
        for (const auto& [task, n] : report.snapshots)
            std::cout << "snapshots " << task << ": " << n << "\n";
        for (const auto& [task, push] : report.push_channel)
            std::cout << "channel " << task << ": " << (push ? "push" : "poll") << "\n";
        for (const auto& [task, n] : report.cycle_suppressed)
            std::cout << "cycle-suppressed " << task << ": " << n << "\n";
        for (const auto& t : report.terminal)
            std::cout << "terminal " << t.wire << ": " << t.av
                      << (t.uri.empty() ? " (ghost)" : " " + t.uri) << "\n";
        return kOk;
    } catch (const loom::Error& e) {
        std::cerr << "loom: " << e.what() << "\n";
        return kDomainError;
    }
}

int cmd_trace(const std::string& what, const std::string& subject,
              const std::string& registry_file) {
    try {
        loom::Registry registry(registry_file);
        if (what == "av") {
            std::cout << registry.traveller(subject);
        } else if (what == "task") {
            std::cout << registry.checkpoint(subject);
        } else if (what == "map") {
            std::cout << registry.concept_map();
        } else {
            std::cerr << "loom: trace expects av|task|map\n";
            return kUsageError;
        }
        return kOk;
    } catch (const loom::Error& e) {
        std::cerr << "loom: " << e.what() << "\n";
        return kDomainError;
    }
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Wiring-driven pipeline runner with causal provenance"};
    app.require_subcommand(1);

    // validate
    std::string v_pipeline, v_format = "text";
    auto* validate = app.add_subcommand("validate", "Parse and check a wiring file");
    validate->add_option("pipeline", v_pipeline, "wiring file")->required();
    validate->add_option("--format", v_format, "text|json")
        ->check(CLI::IsMember({"text", "json"}));

    // run
    RunFlags rf;
    auto* run = app.add_subcommand("run", "Execute a pipeline");
    run->add_option("pipeline", rf.pipeline, "wiring file")->required();
    run->add_option("--mode", rf.mode, "reactive|pull")
        ->check(CLI::IsMember({"reactive", "pull"}));
    run->add_option("--target", rf.target, "pull target task or wire");
    run->add_option("--events", rf.events_file, "source event feed file");
    run->add_option("--config", rf.config_file, "run settings JSON");
    run->add_option("--store", rf.store_dir, "content store directory ($LOOM_STORE)");
    run->add_option("--registry", rf.registry_file,
                    "provenance registry file ($LOOM_REGISTRY)");
    run->add_option("--report", rf.report_file, "run report output (JSONL; - for none)");
    run->add_option("--resume", rf.resume_file, "restore engine state before running");
    run->add_option("--save-state", rf.save_state_file, "save engine state after running");
    run->add_option("--seed", rf.seed, "id generator seed");
    run->add_option("--workers", rf.workers, "parallel task invocations");
    run->add_option("--max-events", rf.max_events, "stop after this many source events");
    run->add_option("--deadline", rf.deadline_ms, "stop after this many run-clock ms");
    run->add_flag("--ghost", rf.ghost, "routing-only run: no payloads, no user code");
    run->add_flag("--wall", rf.wall, "wall-clock mode (disables deterministic ids/time)");
    run->add_option("--format", rf.format, "text|json")
        ->check(CLI::IsMember({"text", "json"}));

    // trace
    std::string t_what, t_subject, t_registry;
    auto* trace = app.add_subcommand("trace", "Render provenance stories");
    trace->add_option("what", t_what, "av|task|map")->required();
    trace->add_option("subject", t_subject, "value id or task name");
    trace->add_option("--registry", t_registry, "provenance registry file ($LOOM_REGISTRY)");

    // graph
    std::string g_pipeline, g_out;
    auto* graph = app.add_subcommand("graph", "Emit the task graph as DOT");
    graph->add_option("pipeline", g_pipeline, "wiring file")->required();
    graph->add_option("-o,--output", g_out, "output file (default stdout)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? kOk : kUsageError;
    }

    if (validate->parsed()) return cmd_validate(v_pipeline, v_format);
    if (run->parsed()) return cmd_run(rf);
    if (trace->parsed()) {
        if (t_registry.empty())
            t_registry = env_or("LOOM_REGISTRY", "loom-store/registry.jsonl");
        if (t_what != "map" && t_subject.empty()) {
            std::cerr << "loom: trace " << t_what << " needs a subject\n";
            return kUsageError;
        }
        return cmd_trace(t_what, t_subject, t_registry);
    }
    if (graph->parsed()) return cmd_graph(g_pipeline, g_out);
    return kUsageError;
}
