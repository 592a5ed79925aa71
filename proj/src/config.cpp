#include "loom/config.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "loom/error.hpp"

namespace loom {

namespace fs = std::filesystem;
using nlohmann::json;

const TaskConfig& RunSettings::task(const std::string& name) const {
    auto it = tasks.find(name);
    if (it == tasks.end())
        throw ConfigError("no configuration for task '" + name + "'");
    return it->second;
}

RunSettings default_run_settings(const PipelineSpec& spec) {
    RunSettings s;
    for (const auto& t : spec.tasks) s.tasks[t.name] = TaskConfig{};
    return s;
}

namespace {

std::string resolve_path(const std::string& p, const fs::path& base) {
    fs::path path(p);
    if (path.is_absolute() || base.empty()) return path.string();
    return (base / path).lexically_normal().string();
}

TaskConfig parse_task_config(const json& j, const std::string& name,
                             const fs::path& base) {
    TaskConfig cfg;
    if (j.contains("exec")) {
        auto argv = j["exec"].get<std::vector<std::string>>();
        if (!argv.empty()) argv[0] = resolve_path(argv[0], base);
        cfg.exec = std::move(argv);
    }
    if (j.contains("code_version")) {
        cfg.code_version = j["code_version"].get<std::string>();
        if (cfg.code_version.empty())
            throw ConfigError("task '" + name + "': code_version must be nonempty");
    }
    if (j.contains("policy")) {
        auto mode = policy_mode_from_string(j["policy"].get<std::string>());
        if (!mode)
            throw ConfigError("task '" + name + "': unknown policy '" +
                              j["policy"].get<std::string>() +
                              "' (use all_new, swap_new_for_old, or merge)");
        cfg.policy.mode = *mode;
    }
    if (j.contains("wait_rule")) {
        std::string w = j["wait_rule"].get<std::string>();
        if (w == "exact")
            cfg.policy.wait_rule = WaitRule::Exact;
        else if (w == "min")
            cfg.policy.wait_rule = WaitRule::Min;
        else
            throw ConfigError("task '" + name + "': unknown wait_rule '" + w +
                              "' (use exact or min)");
    }
    if (j.contains("min_execution_interval_ms")) {
        cfg.min_execution_interval_ms = j["min_execution_interval_ms"].get<int64_t>();
        if (cfg.min_execution_interval_ms < 0)
            throw ConfigError("task '" + name +
                              "': min_execution_interval_ms must be >= 0");
    }
    if (j.contains("service_time_ms"))
        cfg.service_time_ms = j["service_time_ms"].get<double>();
    return cfg;
}

ImplicitAdapter parse_adapter(const json& j, const std::string& wire,
                              const fs::path& base) {
    ImplicitAdapter a;
    if (j.contains("fixture")) a.fixture = resolve_path(j["fixture"].get<std::string>(), base);
    if (j.contains("argv")) {
        a.argv = j["argv"].get<std::vector<std::string>>();
        if (!a.argv.empty()) a.argv[0] = resolve_path(a.argv[0], base);
    }
    if (j.contains("request_slot")) a.request_slot = j["request_slot"].get<std::string>();
    if (!a.fixture.empty() && !a.argv.empty())
        throw ConfigError("implicit wire '" + wire +
                          "': give either a fixture or an argv, not both");
    if (!a.valid())
        throw ConfigError("implicit wire '" + wire +
                          "': adapter needs a fixture or an argv");
    return a;
}

} // namespace

RunSettings parse_run_settings(const std::string& json_text, const fs::path& base_dir,
                               const PipelineSpec& spec) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const std::exception& e) {
        throw ConfigError(std::string("run config: invalid JSON: ") + e.what());
    }

    RunSettings s = default_run_settings(spec);

    if (j.contains("engine")) {
        const json& e = j["engine"];
        if (e.contains("seed")) s.engine.seed = e["seed"].get<uint64_t>();
        if (e.contains("deterministic"))
            s.engine.deterministic = e["deterministic"].get<bool>();
        if (e.contains("workers")) {
            s.engine.workers = e["workers"].get<int>();
            if (s.engine.workers < 1)
                throw ConfigError("run config: workers must be >= 1");
        }
        if (e.contains("queue_capacity")) {
            s.engine.queue_capacity = e["queue_capacity"].get<int64_t>();
            if (s.engine.queue_capacity < 1)
                throw ConfigError("run config: queue_capacity must be >= 1");
        }
        if (e.contains("max_cycle_iterations")) {
            s.engine.max_cycle_iterations = e["max_cycle_iterations"].get<int>();
            if (s.engine.max_cycle_iterations < 1)
                throw ConfigError("run config: max_cycle_iterations must be >= 1");
        }
        if (e.contains("notify_threshold"))
            s.engine.notify_threshold = e["notify_threshold"].get<double>();
        if (e.contains("notify_default"))
            s.engine.notify_default = e["notify_default"].get<bool>() ;
    }

    if (j.contains("tasks")) {
        for (const auto& [name, tj] : j["tasks"].items()) {
            const TaskDecl* decl = spec.find_task(name);
            if (!decl)
                throw ConfigError("run config: unknown task '" + name + "'");
            TaskConfig cfg = parse_task_config(tj, name, base_dir);
            if (cfg.policy.mode == PolicyMode::Merge) {
                for (const auto& slot : decl->inputs)
                    if (slot.windowed())
                        s.warnings.push_back("task '" + name +
                                             "': window on slot '" + slot.wire +
                                             "' is ignored under merge");
                size_t streams = 0;
                for (const auto& slot : decl->inputs)
                    if (!slot.implicit) ++streams;
                if (streams > 1)
                    s.warnings.push_back(
                        "task '" + name + "': merge interleaves " +
                        std::to_string(streams) +
                        " input streams into one; ensure the program accepts "
                        "values from any of them");
            }
            s.tasks[name] = std::move(cfg);
        }
    }

    if (j.contains("implicits")) {
        // Collect the wires consumed implicitly anywhere in the pipeline.
        std::map<std::string, bool> implicit_wires;
        for (const auto& t : spec.tasks)
            for (const auto& slot : t.inputs)
                if (slot.implicit) implicit_wires[slot.wire] = true;
        for (const auto& [wire, aj] : j["implicits"].items()) {
            if (!implicit_wires.count(wire))
                throw ConfigError("run config: no task consumes wire '" + wire +
                                  "' implicitly");
            s.implicits[wire] = parse_adapter(aj, wire, base_dir);
        }
    }

    return s;
}

RunSettings load_run_settings(const fs::path& file, const PipelineSpec& spec) {
    std::ifstream f(file);
    if (!f) throw ConfigError("run config: cannot read " + file.string());
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_run_settings(ss.str(), file.parent_path(), spec);
}

} // namespace loom
