#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "loom/digest.hpp"

using namespace loom;

// FIPS 180-4 tells us what SHA-256 of these inputs must be; any deviation
// means the wrapper, not the test, is wrong.
TEST_CASE("sha256 matches published vectors") {
    CHECK(sha256_hex("") ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq") ==
          "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1");
}

TEST_CASE("byte-span and string overloads agree") {
    std::string text = "snapshot\x00payload";
    std::vector<std::byte> bytes;
    for (char c : text) bytes.push_back(static_cast<std::byte>(c));
    CHECK(sha256_hex(text) == sha256_hex(std::span<const std::byte>(bytes)));
}

TEST_CASE("digest is 64 lowercase hex characters") {
    std::string d = sha256_hex("anything");
    CHECK(d.size() == 64);
    for (char c : d) CHECK(((c >= '0' && c <= '9') || (c >= 'a' && c <= 'f')));
}

TEST_CASE("field digests separate field boundaries") {
    // Concatenation-equal field lists must not collide: ["ab","c"] vs
    // ["a","bc"] vs ["abc"].
    auto d1 = sha256_fields({"ab", "c"});
    auto d2 = sha256_fields({"a", "bc"});
    auto d3 = sha256_fields({"abc"});
    CHECK(d1 != d2);
    CHECK(d1 != d3);
    CHECK(d2 != d3);
}

TEST_CASE("field digests are order-sensitive and deterministic") {
    CHECK(sha256_fields({"x", "y"}) != sha256_fields({"y", "x"}));
    CHECK(sha256_fields({"x", "y"}) == sha256_fields({"x", "y"}));
    CHECK(sha256_fields({}) != sha256_fields({""}));
}

TEST_CASE("to_hex renders bytes in order") {
    std::vector<unsigned char> bytes{0x00, 0x0f, 0xa5, 0xff};
    CHECK(to_hex(bytes) == "000fa5ff");
}
