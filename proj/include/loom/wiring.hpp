#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace loom {

// One named input of a task. A slot either consumes a stream wire (with a
// minimum buffer or a sliding window) or names an implicit client-server
// lookup resolved out of band of the dataflow.
struct InputSlot {
    std::string wire;
    int buffer_min = 1;
    std::optional<int> window_size;
    std::optional<int> slide;
    bool implicit = false;

    bool windowed() const { return window_size.has_value(); }
    // AVs a snapshot draws from this slot.
    int required() const { return window_size ? *window_size : buffer_min; }

    bool operator==(const InputSlot&) const = default;
};

struct OutputDecl {
    std::string wire;
    bool implicit = false;

    bool operator==(const OutputDecl&) const = default;
};

struct TaskDecl {
    std::string name;
    std::vector<InputSlot> inputs;
    std::vector<OutputDecl> outputs;
    // Supplied by run configuration, not the wiring text.
    std::vector<std::string> exec;
    std::string code_version = "v0";
    int line = 0;

    bool operator==(const TaskDecl& o) const {
        return name == o.name && inputs == o.inputs && outputs == o.outputs;
    }
};

// A directed data edge: `wire` produced by task `from`, consumed by task `to`.
// Source wires (consumed but never produced) are not wires in this sense;
// they are ingress points.
struct WireDecl {
    std::string wire;
    std::string from;
    std::string to;
    bool implicit = false;

    auto operator<=>(const WireDecl&) const = default;
};

struct SourceLocation {
    int line = 0;
    int column = 0;
};

enum class Severity { Error, Warning, Info };

struct Diagnostic {
    Severity severity = Severity::Error;
    SourceLocation location;
    std::string code;    // stable short identifier, e.g. "two-producers"
    std::string message;
};

// Sparse integer matrix over task indices.
struct SparseMatrix {
    int size = 0;
    std::map<std::pair<int, int>, int> entries;

    int at(int a, int b) const {
        auto it = entries.find({a, b});
        return it == entries.end() ? 0 : it->second;
    }
    int nonzeros() const { return static_cast<int>(entries.size()); }
    int sum() const {
        int total = 0;
        for (const auto& [_, v] : entries) total += v;
        return total;
    }
};

struct PipelineSpec {
    std::string name;
    std::vector<TaskDecl> tasks;
    std::vector<WireDecl> wires; // derived, sorted; stream and implicit edges

    const TaskDecl* find_task(const std::string& name) const;
    int task_index(const std::string& name) const; // -1 if absent

    // Wires consumed (as stream slots) but produced by no task.
    std::vector<std::string> source_wires() const;
    // Stream consumers of a wire, in declaration order: (task, slot index).
    std::vector<std::pair<std::string, int>> consumers_of(const std::string& wire) const;

    bool operator==(const PipelineSpec& o) const {
        return name == o.name && tasks == o.tasks;
    }
};

// Parse the wiring language. Line-oriented:
//   [name]                          pipeline header
//   (slot, slot) taskname (out, out)
//   # comment
// slot = name | name[N] | name[N/S] | name implicit. Throws ParseError with
// line/column on malformed input, duplicate task names, or bad window specs.
PipelineSpec parse(const std::string& text);

// Purely topological checks. Never throws: problems come back as diagnostics.
// Cycles are legal and reported as info, one per elementary cycle.
std::vector<Diagnostic> validate(const PipelineSpec& spec);

inline bool has_errors(const std::vector<Diagnostic>& diags) {
    for (const auto& d : diags) {
        if (d.severity == Severity::Error) return true;
    }
    return false;
}

// Stream-wire counts between task indices, and the parallel matrix of
// implicit links. Rejects (throws) specs whose validation reports errors.
struct AdjacencyResult {
    SparseMatrix stream;
    SparseMatrix implicit;
};
AdjacencyResult adjacency(const PipelineSpec& spec);

// Canonical text: parse(render(s)) is structurally equal to s.
std::string render(const PipelineSpec& spec);

std::string render_diagnostic(const Diagnostic& d);

} // namespace loom
