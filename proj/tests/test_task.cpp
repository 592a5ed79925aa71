#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <fstream>

#include "loom/digest.hpp"
#include "loom/error.hpp"
#include "loom/task.hpp"
#include "util.hpp"

using namespace loom;

namespace {

InputSlot slot(const std::string& wire, bool implicit = false) {
    InputSlot s;
    s.wire = wire;
    s.implicit = implicit;
    return s;
}

AnnotatedValue val(const std::string& id, const std::string& wire, const std::string& uri,
                   bool ghost = false) {
    AnnotatedValue av;
    av.id = id;
    av.wire = wire;
    av.payload_ref = uri;
    av.ghost = ghost;
    av.code_version = "v1";
    return av;
}

} // namespace

TEST_CASE("cache keys react to every dependency and nothing else") {
    CacheKeyParts base;
    base.task = "convert";
    base.code_version = "v1";
    base.slot_uris = {{"cas:a", "cas:b"}, {"cas:c"}};
    base.implicit_digests = {"d1"};

    std::string k = cache_key(base);
    CHECK(k.size() == 64);
    CHECK(cache_key(base) == k); // pure function

    auto mutated = base;
    mutated.task = "predict";
    CHECK(cache_key(mutated) != k);

    mutated = base;
    mutated.code_version = "v2";
    CHECK(cache_key(mutated) != k);

    mutated = base;
    mutated.slot_uris[0][1] = "cas:B";
    CHECK(cache_key(mutated) != k);

    mutated = base;
    mutated.implicit_digests[0] = "d2";
    CHECK(cache_key(mutated) != k);

    // Moving a uri across a slot boundary is a different dependency shape.
    auto flat = base;
    flat.slot_uris = {{"cas:a"}, {"cas:b", "cas:c"}};
    CHECK(cache_key(flat) != k);
}

TEST_CASE("cache hits require resident output payloads") {
    testutil::TempDir dir("cache");
    Clock clock(true);
    StorePolicy policy;
    policy.ttl_simple_ms = 100;
    ContentStore store(dir.path(), policy, &clock);

    std::string uri = store.put(std::string("result"), EvictionClass::IntermediateSimple);
    ExecutionCache cache;
    cache.insert("key1", {{uri}});
    CHECK(cache.size() == 1);

    auto hit = cache.lookup("key1", store);
    REQUIRE(hit.has_value());
    CHECK(hit->output_uris == std::vector<std::string>{uri});
    CHECK(!cache.lookup("other", store).has_value());

    // Evict the payload: the entry remains but no longer answers.
    clock.advance_to(kSimEpochMs + 200);
    store.evict(clock.now_ms());
    CHECK(!cache.lookup("key1", store).has_value());
}

TEST_CASE("materialize lays out labelled payload files in slot order") {
    testutil::TempDir dir("mat");
    Clock clock(true);
    ContentStore store(dir.path() / "store", StorePolicy{}, &clock);

    std::string u1 = store.put(std::string("one"), EvictionClass::Source);
    std::string u2 = store.put(std::string("two"), EvictionClass::Source);
    std::string u3 = store.put(std::string("three"), EvictionClass::Source);

    std::vector<InputSlot> slots = {slot("raw"), slot("cfg"), slot("svc", true)};
    Snapshot snap;
    snap.slots = {{val("r1", "raw", u1), val("r2", "raw", u2)}, {val("c1", "cfg", u3)}, {}};

    auto files = materialize(snap, slots, store, dir.path() / "work");
    REQUIRE(files.size() == 3);
    CHECK(files[0].filename().string() == "raw.0.r1");
    CHECK(files[1].filename().string() == "raw.1.r2");
    CHECK(files[2].filename().string() == "cfg.0.c1");
    CHECK(testutil::read_file(files[0].string()) == "one");
    CHECK(testutil::read_file(files[1].string()) == "two");
    CHECK(testutil::read_file(files[2].string()) == "three");

    SUBCASE("ghost snapshots materialize nothing") {
        Snapshot ghost;
        ghost.slots = {{val("g1", "raw", "", true)}, {}, {}};
        auto none = materialize(ghost, slots, store, dir.path() / "ghost-work");
        CHECK(none.empty());
        CHECK(!std::filesystem::exists(dir.path() / "ghost-work"));
    }

    SUBCASE("an evicted payload aborts materialization") {
        Snapshot broken;
        broken.slots = {{val("r9", "raw", "cas:" + sha256_hex("never-stored"))}, {}, {}};
        CHECK_THROWS_AS(materialize(broken, slots, store, dir.path() / "broken"),
                        NotFoundError);
    }
}

TEST_CASE("run_process reports exits, signals, stderr, env, and cwd") {
    testutil::TempDir dir("proc");

    CHECK(run_process({"sh", "-c", "exit 0"}, dir.path(), {}).exit_code == 0);
    CHECK(run_process({"sh", "-c", "exit 7"}, dir.path(), {}).exit_code == 7);

    auto r = run_process({"sh", "-c", "echo oops >&2; exit 1"}, dir.path(), {});
    CHECK(r.exit_code == 1);
    CHECK(r.stderr_text == "oops\n");

    r = run_process({"sh", "-c", "printf %s \"$LOOM_SNAPSHOT_KEY\" >&2"}, dir.path(),
                    {{"LOOM_SNAPSHOT_KEY", "k123"}});
    CHECK(r.stderr_text == "k123");

    run_process({"sh", "-c", "touch marker"}, dir.path(), {});
    CHECK(std::filesystem::exists(dir.path() / "marker"));

    // Killed by a signal: the conventional 128+signo encoding.
    CHECK(run_process({"sh", "-c", "kill -9 $$"}, dir.path(), {}).exit_code == 137);

    // Unspawnable program: shell-style 127 with the failure on stderr.
    r = run_process({"/definitely/not/here"}, dir.path(), {});
    CHECK(r.exit_code == 127);
    CHECK(r.stderr_text.find("exec failed") != std::string::npos);

    CHECK_THROWS_AS(run_process({}, dir.path(), {}), ServiceError);

    CHECK(run_process({STUB_BIN, "fail", "5"}, dir.path(), {}).exit_code == 5);
}

TEST_CASE("implicit adapters freeze their responses into the store") {
    testutil::TempDir dir("imp");
    Clock clock(true);
    ContentStore store(dir.path() / "store", StorePolicy{}, &clock);

    SUBCASE("fixture files are read verbatim") {
        testutil::write_file((dir.path() / "table.txt").string(), "svc-data");
        ImplicitAdapter adapter;
        adapter.fixture = (dir.path() / "table.txt").string();
        auto out = resolve_implicit(adapter, "ignored", store, dir.path() / "scratch");
        CHECK(out.uri == "cas:" + sha256_hex("svc-data"));
        CHECK(out.digest == sha256_hex("svc-data"));
        CHECK(store.get(out.uri) == "svc-data");
    }

    SUBCASE("programs get the request and must write the response") {
        ImplicitAdapter adapter;
        adapter.argv = {STUB_BIN, "adapter", "-v2"};
        auto out = resolve_implicit(adapter, "model", store, dir.path() / "scratch");
        CHECK(store.get(out.uri) == "model-v2");
        CHECK(out.digest == sha256_hex("model-v2"));
    }

    SUBCASE("failures surface as service errors") {
        ImplicitAdapter none;
        CHECK_THROWS_AS(resolve_implicit(none, "", store, dir.path() / "s1"), ServiceError);

        ImplicitAdapter missing;
        missing.fixture = (dir.path() / "absent.txt").string();
        CHECK_THROWS_AS(resolve_implicit(missing, "", store, dir.path() / "s2"),
                        ServiceError);

        ImplicitAdapter failing;
        failing.argv = {STUB_BIN, "adapter-fail"};
        CHECK_THROWS_AS(resolve_implicit(failing, "", store, dir.path() / "s3"),
                        ServiceError);

        ImplicitAdapter silent;
        silent.argv = {STUB_BIN, "noout"};
        CHECK_THROWS_AS(resolve_implicit(silent, "", store, dir.path() / "s4"),
                        ServiceError);
    }
}
