#include "loom/wiring.hpp"

#include <algorithm>
#include <functional>
#include <set>
#include <sstream>

#include "loom/error.hpp"

namespace loom {

namespace {

bool is_ident_start(char c) {
    return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_';
}

bool is_ident_char(char c) {
    return is_ident_start(c) || (c >= '0' && c <= '9') || c == '-';
}

struct Cursor {
    const std::string& text;
    size_t pos = 0;
    int line = 1;
    int col = 1;
};

// Single physical line being parsed, with 1-based column tracking.
struct LineScanner {
    std::string_view s;
    int line;
    size_t pos = 0;

    int col() const { return static_cast<int>(pos) + 1; }
    bool eol() const { return pos >= s.size(); }
    char peek() const { return eol() ? '\0' : s[pos]; }
    void skip_ws() {
        while (!eol() && (s[pos] == ' ' || s[pos] == '\t')) pos++;
    }
    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(msg, line, col());
    }
    void expect(char c) {
        if (peek() != c) fail(std::string("expected '") + c + "'");
        pos++;
    }
    std::string ident() {
        skip_ws();
        if (eol() || !is_ident_start(peek())) fail("expected identifier");
        size_t start = pos;
        while (!eol() && is_ident_char(peek())) pos++;
        return std::string(s.substr(start, pos - start));
    }
    int number() {
        skip_ws();
        if (eol() || !isdigit(static_cast<unsigned char>(peek()))) fail("expected number");
        size_t start = pos;
        while (!eol() && isdigit(static_cast<unsigned char>(peek()))) pos++;
        return std::stoi(std::string(s.substr(start, pos - start)));
    }
};

InputSlot parse_input_slot(LineScanner& sc) {
    InputSlot slot;
    int spec_col = sc.col();
    slot.wire = sc.ident();
    if (sc.peek() == '[') {
        spec_col = sc.col();
        sc.pos++;
        int n = sc.number();
        if (sc.peek() == '/') {
            sc.pos++;
            int s = sc.number();
            if (n < 1 || s < 1 || s > n) {
                throw ParseError("malformed window spec [" + std::to_string(n) + "/" +
                                     std::to_string(s) + "]: need 1 <= slide <= window",
                                 sc.line, spec_col);
            }
            slot.window_size = n;
            slot.slide = s;
        } else {
            if (n < 1) {
                throw ParseError("buffer size must be >= 1", sc.line, spec_col);
            }
            slot.buffer_min = n;
        }
        sc.expect(']');
    }
    sc.skip_ws();
    // `name implicit` marks a client-server lookup slot.
    if (!sc.eol() && is_ident_start(sc.peek())) {
        size_t save = sc.pos;
        std::string word = sc.ident();
        if (word == "implicit") {
            if (slot.windowed() || slot.buffer_min != 1) {
                throw ParseError("implicit slot cannot carry a buffer or window spec",
                                 sc.line, spec_col);
            }
            slot.implicit = true;
        } else {
            sc.pos = save;
            sc.fail("unexpected token '" + word + "' in slot list");
        }
    }
    return slot;
}

OutputDecl parse_output(LineScanner& sc) {
    OutputDecl out;
    out.wire = sc.ident();
    sc.skip_ws();
    if (!sc.eol() && is_ident_start(sc.peek())) {
        size_t save = sc.pos;
        std::string word = sc.ident();
        if (word == "implicit") {
            out.implicit = true;
        } else {
            sc.pos = save;
            sc.fail("unexpected token '" + word + "' in output list");
        }
    }
    return out;
}

template <typename T, typename F>
std::vector<T> parse_paren_list(LineScanner& sc, F parse_item) {
    std::vector<T> items;
    sc.skip_ws();
    sc.expect('(');
    sc.skip_ws();
    if (sc.peek() == ')') {
        sc.pos++;
        return items;
    }
    while (true) {
        items.push_back(parse_item(sc));
        sc.skip_ws();
        if (sc.peek() == ',') {
            sc.pos++;
            sc.skip_ws();
            continue;
        }
        sc.expect(')');
        break;
    }
    return items;
}

void derive_wires(PipelineSpec& spec) {
    spec.wires.clear();
    for (const auto& producer : spec.tasks) {
        for (const auto& out : producer.outputs) {
            for (const auto& consumer : spec.tasks) {
                for (const auto& slot : consumer.inputs) {
                    if (slot.wire != out.wire) continue;
                    // An edge forms when both ends agree on the channel kind.
                    if (slot.implicit == out.implicit) {
                        spec.wires.push_back({out.wire, producer.name, consumer.name, out.implicit});
                    }
                }
            }
        }
    }
    std::sort(spec.wires.begin(), spec.wires.end());
    spec.wires.erase(std::unique(spec.wires.begin(), spec.wires.end()), spec.wires.end());
}

// Elementary cycles by DFS from each root task, canonicalized to start at
// their smallest task index. Bounded; wiring graphs are desk-scale.
std::vector<std::vector<int>> find_cycles(const PipelineSpec& spec, size_t cap = 64) {
    int n = static_cast<int>(spec.tasks.size());
    std::vector<std::vector<int>> succ(n);
    for (const auto& w : spec.wires) {
        if (w.implicit) continue;
        succ[spec.task_index(w.from)].push_back(spec.task_index(w.to));
    }
    for (auto& v : succ) {
        std::sort(v.begin(), v.end());
        v.erase(std::unique(v.begin(), v.end()), v.end());
    }

    std::set<std::vector<int>> seen;
    std::vector<std::vector<int>> cycles;
    std::vector<int> path;
    std::vector<char> on_path(n, 0);

    std::function<void(int, int)> dfs = [&](int root, int node) {
        if (seen.size() >= cap) return;
        path.push_back(node);
        on_path[node] = 1;
        for (int next : succ[node]) {
            if (next == root) {
                // Canonical rotation: begin at the smallest index.
                auto cycle = path;
                auto smallest = std::min_element(cycle.begin(), cycle.end());
                std::rotate(cycle.begin(), smallest, cycle.end());
                if (seen.insert(cycle).second) cycles.push_back(cycle);
            } else if (next > root && !on_path[next]) {
                dfs(root, next);
            }
        }
        on_path[node] = 0;
        path.pop_back();
    };

    for (int root = 0; root < n; ++root) dfs(root, root);
    std::sort(cycles.begin(), cycles.end());
    return cycles;
}

} // namespace

const TaskDecl* PipelineSpec::find_task(const std::string& name) const {
    for (const auto& t : tasks) {
        if (t.name == name) return &t;
    }
    return nullptr;
}

int PipelineSpec::task_index(const std::string& name) const {
    for (size_t i = 0; i < tasks.size(); ++i) {
        if (tasks[i].name == name) return static_cast<int>(i);
    }
    return -1;
}

std::vector<std::string> PipelineSpec::source_wires() const {
    std::set<std::string> produced;
    for (const auto& t : tasks) {
        for (const auto& o : t.outputs) produced.insert(o.wire);
    }
    std::vector<std::string> sources;
    std::set<std::string> seen;
    for (const auto& t : tasks) {
        for (const auto& s : t.inputs) {
            if (!s.implicit && !produced.count(s.wire) && seen.insert(s.wire).second) {
                sources.push_back(s.wire);
            }
        }
    }
    return sources;
}

std::vector<std::pair<std::string, int>> PipelineSpec::consumers_of(const std::string& wire) const {
    std::vector<std::pair<std::string, int>> result;
    for (const auto& t : tasks) {
        for (size_t i = 0; i < t.inputs.size(); ++i) {
            if (!t.inputs[i].implicit && t.inputs[i].wire == wire) {
                result.emplace_back(t.name, static_cast<int>(i));
            }
        }
    }
    return result;
}

PipelineSpec parse(const std::string& text) {
    PipelineSpec spec;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    bool named = false;

    while (std::getline(in, raw)) {
        line_no++;
        if (auto hash = raw.find('#'); hash != std::string::npos) {
            raw.resize(hash);
        }
        LineScanner sc{raw, line_no};
        sc.skip_ws();
        if (sc.eol()) continue;

        if (sc.peek() == '[') {
            if (named) {
                sc.fail("duplicate pipeline header");
            }
            sc.pos++;
            spec.name = sc.ident();
            sc.expect(']');
            sc.skip_ws();
            if (!sc.eol()) sc.fail("trailing text after pipeline header");
            named = true;
            continue;
        }

        TaskDecl task;
        task.line = line_no;
        task.inputs = parse_paren_list<InputSlot>(sc, parse_input_slot);
        task.name = sc.ident();
        task.outputs = parse_paren_list<OutputDecl>(sc, parse_output);
        sc.skip_ws();
        if (!sc.eol()) sc.fail("trailing text after task declaration");

        if (task.inputs.empty() && task.outputs.empty()) {
            throw ParseError("task '" + task.name + "' has neither inputs nor outputs",
                             line_no, 1);
        }
        if (spec.find_task(task.name)) {
            throw ParseError("duplicate task name '" + task.name + "'", line_no, 1);
        }
        spec.tasks.push_back(std::move(task));
    }

    derive_wires(spec);
    return spec;
}

std::vector<Diagnostic> validate(const PipelineSpec& spec) {
    std::vector<Diagnostic> diags;
    auto add = [&](Severity sev, int line, std::string code, std::string msg) {
        diags.push_back({sev, {line, 1}, std::move(code), std::move(msg)});
    };

    // Producer counts per wire, split by channel kind.
    std::map<std::string, std::vector<std::string>> stream_producers;
    std::map<std::string, std::vector<std::string>> implicit_producers;
    for (const auto& t : spec.tasks) {
        for (const auto& o : t.outputs) {
            (o.implicit ? implicit_producers : stream_producers)[o.wire].push_back(t.name);
        }
    }

    for (const auto& [wire, producers] : stream_producers) {
        if (producers.size() > 1) {
            std::string who;
            for (const auto& p : producers) who += (who.empty() ? "" : ", ") + p;
            add(Severity::Error, 0, "two-producers",
                "wire '" + wire + "' has " + std::to_string(producers.size()) +
                    " producers (" + who + "); a wire needs exactly one");
        }
    }
    for (const auto& [wire, producers] : implicit_producers) {
        if (producers.size() > 1) {
            add(Severity::Error, 0, "two-producers",
                "implicit wire '" + wire + "' has multiple providers");
        }
    }

    // Slot-side checks in declaration order.
    for (const auto& t : spec.tasks) {
        for (const auto& s : t.inputs) {
            if (s.implicit) {
                if (!implicit_producers.count(s.wire)) {
                    add(Severity::Warning, t.line, "external-service",
                        "implicit wire '" + s.wire + "' consumed by '" + t.name +
                            "' has no in-pipeline provider; an external adapter must serve it");
                }
            } else if (!stream_producers.count(s.wire)) {
                // Consumed but never produced: an ingress point, by convention.
                add(Severity::Info, t.line, "source-wire",
                    "wire '" + s.wire + "' is a source wire (external ingress)");
            }
        }
        for (const auto& o : t.outputs) {
            if (o.implicit) continue;
            if (spec.consumers_of(o.wire).empty()) {
                add(Severity::Warning, t.line, "unconsumed-output",
                    "output wire '" + o.wire + "' of task '" + t.name + "' is never consumed");
            }
        }
    }

    // Deduplicate source-wire infos (a source may feed several tasks).
    {
        std::set<std::string> seen;
        std::vector<Diagnostic> out;
        for (auto& d : diags) {
            if (d.code == "source-wire" && !seen.insert(d.message).second) continue;
            out.push_back(std::move(d));
        }
        diags = std::move(out);
    }

    // Cycles are legal (the wiring model admits feedback); report as info.
    for (const auto& cycle : find_cycles(spec)) {
        std::string seq;
        for (int idx : cycle) seq += (seq.empty() ? "" : ", ") + spec.tasks[idx].name;
        add(Severity::Info, 0, "cycle", "directed cycle: [" + seq + "]");
    }

    std::stable_sort(diags.begin(), diags.end(), [](const Diagnostic& a, const Diagnostic& b) {
        return static_cast<int>(a.severity) < static_cast<int>(b.severity);
    });
    return diags;
}

AdjacencyResult adjacency(const PipelineSpec& spec) {
    auto diags = validate(spec);
    if (has_errors(diags)) {
        std::string first;
        for (const auto& d : diags) {
            if (d.severity == Severity::Error) { first = d.message; break; }
        }
        throw Error("adjacency on invalid spec: " + first);
    }
    AdjacencyResult result;
    result.stream.size = result.implicit.size = static_cast<int>(spec.tasks.size());
    for (const auto& w : spec.wires) {
        int a = spec.task_index(w.from);
        int b = spec.task_index(w.to);
        (w.implicit ? result.implicit : result.stream).entries[{a, b}] += 1;
    }
    return result;
}

std::string render(const PipelineSpec& spec) {
    std::ostringstream out;
    if (!spec.name.empty()) {
        out << '[' << spec.name << "]\n";
    }
    for (const auto& t : spec.tasks) {
        out << '(';
        for (size_t i = 0; i < t.inputs.size(); ++i) {
            const auto& s = t.inputs[i];
            if (i) out << ", ";
            out << s.wire;
            if (s.windowed()) {
                out << '[' << *s.window_size << '/' << *s.slide << ']';
            } else if (s.buffer_min != 1) {
                out << '[' << s.buffer_min << ']';
            }
            if (s.implicit) out << " implicit";
        }
        out << ") " << t.name << " (";
        for (size_t i = 0; i < t.outputs.size(); ++i) {
            if (i) out << ", ";
            out << t.outputs[i].wire;
            if (t.outputs[i].implicit) out << " implicit";
        }
        out << ")\n";
    }
    return out.str();
}

std::string render_diagnostic(const Diagnostic& d) {
    const char* sev = d.severity == Severity::Error     ? "error"
                      : d.severity == Severity::Warning ? "warning"
                                                        : "info";
    std::ostringstream out;
    out << sev << " [" << d.code << "]";
    if (d.location.line > 0) out << " line " << d.location.line;
    out << ": " << d.message;
    return out.str();
}

} // namespace loom
