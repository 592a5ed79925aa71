#pragma once

#include <cstdint>
#include <random>
#include <sstream>
#include <string>

#include "loom/digest.hpp"

namespace loom {

// 128-bit random identifiers. Two executions producing identical bytes are
// distinct forensic events, so ids are random, never content-derived.
// In deterministic runs the generator is seeded and its state can be
// checkpointed, so a resumed run continues the same id stream.
class IdGen {
public:
    IdGen() : engine_(std::random_device{}()) {}
    explicit IdGen(uint64_t seed) : engine_(seed) {}

    std::string next() {
        unsigned char raw[16];
        for (int half = 0; half < 2; ++half) {
            uint64_t v = engine_();
            for (int i = 0; i < 8; ++i) {
                raw[half * 8 + i] = static_cast<unsigned char>(v >> (8 * i));
            }
        }
        return to_hex(std::span<const unsigned char>(raw, 16));
    }

    std::string save_state() const {
        std::ostringstream os;
        os << engine_;
        return os.str();
    }

    void load_state(const std::string& state) {
        std::istringstream is(state);
        is >> engine_;
    }

private:
    std::mt19937_64 engine_;
};

} // namespace loom
