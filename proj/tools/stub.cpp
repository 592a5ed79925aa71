// Test plugin for pipeline runs. Invoked by the engine as
//   stub <mode> [mode-args] <input-file>... <output-file>...
// The trailing-path split comes from LOOM_OUTPUT_COUNT; when that is unset
// (adapter invocations) the last path is taken as the single output.
//
// Set STUB_LOG_FILE to append one line per invocation; tests count real
// process launches that way to tell cache hits from re-executions.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace {

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) {
        std::cerr << "stub: cannot read " << path << "\n";
        std::exit(2);
    }
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) {
        std::cerr << "stub: cannot write " << path << "\n";
        std::exit(2);
    }
    f << content;
}

void log_invocation(const std::string& mode) {
    const char* log = std::getenv("STUB_LOG_FILE");
    if (!log) return;
    std::ofstream f(log, std::ios::app);
    const char* key = std::getenv("LOOM_SNAPSHOT_KEY");
    f << mode << " " << (key ? key : "-") << "\n";
}

} // namespace

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    if (args.empty()) {
        std::cerr << "stub: missing mode\n";
        return 2;
    }
    std::string mode = args[0];
    args.erase(args.begin());
    log_invocation(mode);

    // Modes with leading non-path arguments.
    std::string text_arg;
    if (mode == "emit" || mode == "adapter" || mode == "slow" || mode == "fail") {
        if (args.empty()) {
            std::cerr << "stub: " << mode << " needs an argument\n";
            return 2;
        }
        text_arg = args[0];
        args.erase(args.begin());
    }

    if (mode == "fail") {
        int code = std::atoi(text_arg.c_str());
        std::cerr << "stub: told to fail with " << code << "\n";
        return code == 0 ? 1 : code;
    }

    if (mode == "adapter" || mode == "adapter-fail") {
        if (mode == "adapter-fail") {
            std::cerr << "stub: adapter refusing request\n";
            return 3;
        }
        if (args.size() != 2) {
            std::cerr << "stub: adapter expects <request> <response>\n";
            return 2;
        }
        std::string request = read_file(args[0]);
        write_file(args[1], request + text_arg);
        return 0;
    }

    size_t out_count = 1;
    if (const char* oc = std::getenv("LOOM_OUTPUT_COUNT")) out_count = std::atoi(oc);
    if (args.size() < out_count) {
        std::cerr << "stub: fewer paths than outputs\n";
        return 2;
    }
    std::vector<std::string> outputs(args.end() - static_cast<long>(out_count), args.end());
    args.resize(args.size() - out_count);

    std::string joined;
    for (const auto& in : args) joined += read_file(in);

    std::string result;
    if (mode == "cat") {
        result = joined;
    } else if (mode == "rev") {
        result.assign(joined.rbegin(), joined.rend());
    } else if (mode == "upper") {
        result = joined;
        std::transform(result.begin(), result.end(), result.begin(),
                       [](unsigned char c) { return std::toupper(c); });
    } else if (mode == "emit") {
        result = text_arg;
    } else if (mode == "count") {
        result = std::to_string(args.size()) + "\n";
    } else if (mode == "sum") {
        double total = 0;
        for (const auto& in : args) total += std::strtod(read_file(in).c_str(), nullptr);
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.10g\n", total);
        result = buf;
    } else if (mode == "annotate") {
        const char* key = std::getenv("LOOM_SNAPSHOT_KEY");
        const char* ic = std::getenv("LOOM_INPUT_COUNT");
        const char* oc = std::getenv("LOOM_OUTPUT_COUNT");
        result = "key=" + std::string(key ? key : "") + " in=" +
                 std::string(ic ? ic : "") + " out=" + std::string(oc ? oc : "") + "\n" +
                 joined;
    } else if (mode == "slow") {
        std::this_thread::sleep_for(std::chrono::milliseconds(std::atoi(text_arg.c_str())));
        result = joined;
    } else if (mode == "noout") {
        return 0; // deliberately leaves output files unwritten
    } else {
        std::cerr << "stub: unknown mode '" << mode << "'\n";
        return 2;
    }

    for (const auto& out : outputs) write_file(out, result);
    return 0;
}
