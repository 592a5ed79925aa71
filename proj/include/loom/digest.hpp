#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace loom {

// Name of the content hash used throughout; recorded in store metadata so a
// store directory is self-describing.
inline constexpr const char* kHashAlgorithm = "sha256";

// Hex-encoded SHA-256 of the given bytes.
std::string sha256_hex(std::span<const std::byte> bytes);
std::string sha256_hex(std::string_view text);

// Digest of an ordered list of fields. Fields are length-prefixed before
// hashing so no two distinct lists collide by concatenation.
std::string sha256_fields(const std::vector<std::string>& fields);

std::string to_hex(std::span<const unsigned char> bytes);

} // namespace loom
