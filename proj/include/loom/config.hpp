#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "loom/task.hpp"
#include "loom/wiring.hpp"

namespace loom {

// Engine-wide knobs. Deterministic mode pins the clock to the simulation
// epoch, forces one worker, and draws value ids from the seeded generator,
// so two runs with the same inputs agree byte for byte.
struct EngineSettings {
    uint64_t seed = 1;
    bool deterministic = true;
    int workers = 1;
    int64_t queue_capacity = 4096;
    int max_cycle_iterations = 8;
    double notify_threshold = 1.0;
    bool notify_default = false; // poll unless arrivals say otherwise
};

struct RunSettings {
    EngineSettings engine;
    std::map<std::string, TaskConfig> tasks;          // keyed by task name
    std::map<std::string, ImplicitAdapter> implicits; // keyed by wire name
    std::vector<std::string> warnings;                // soft findings

    const TaskConfig& task(const std::string& name) const;
};

// Defaults for every declared task (no exec programs, all_new policy).
RunSettings default_run_settings(const PipelineSpec& spec);

// Load and validate a run configuration JSON file against a wiring.
// Unknown task names, unknown implicit wires, bad policy strings, and
// negative intervals are hard errors (ConfigError). Relative fixture and
// program paths resolve against the config file's directory.
RunSettings load_run_settings(const std::filesystem::path& file,
                              const PipelineSpec& spec);

// Same, from an already-parsed JSON text (used by tests); base_dir resolves
// relative paths.
RunSettings parse_run_settings(const std::string& json_text,
                               const std::filesystem::path& base_dir,
                               const PipelineSpec& spec);

} // namespace loom
