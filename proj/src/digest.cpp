#include "loom/digest.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace loom {

namespace {

std::array<unsigned char, 32> sha256_raw(const void* data, size_t len) {
    std::array<unsigned char, 32> out{};
    unsigned int out_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx ||
        EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 ||
        EVP_DigestFinal_ex(ctx, out.data(), &out_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 digest failed");
    }
    EVP_MD_CTX_free(ctx);
    return out;
}

} // namespace

std::string to_hex(std::span<const unsigned char> bytes) {
    static const char* digits = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (unsigned char b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0xf]);
    }
    return s;
}

std::string sha256_hex(std::span<const std::byte> bytes) {
    auto raw = sha256_raw(bytes.data(), bytes.size());
    return to_hex(raw);
}

std::string sha256_hex(std::string_view text) {
    auto raw = sha256_raw(text.data(), text.size());
    return to_hex(raw);
}

std::string sha256_fields(const std::vector<std::string>& fields) {
    std::string buf;
    for (const auto& f : fields) {
        buf += std::to_string(f.size());
        buf += ':';
        buf += f;
    }
    return sha256_hex(std::string_view(buf));
}

} // namespace loom
