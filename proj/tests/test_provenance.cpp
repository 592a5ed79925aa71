#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "loom/error.hpp"
#include "loom/provenance.hpp"
#include "util.hpp"

using namespace loom;

namespace {

// Builds the event stream of a two-step chain the way the engine writes it:
//   in --(first)--> mid --(second, +implicit svc)--> out
// followed by one cache-served repeat of `first`.
void seed_chain(Registry& reg) {
    TimestampMs t = kSimEpochMs;
    auto ev = [&](EventKind kind) {
        ProvenanceEvent e;
        e.kind = kind;
        e.at = t;
        return e;
    };

    ProvenanceEvent e = ev(EventKind::Ingest);
    e.wire = "in";
    e.av = "v1";
    e.extra["uri"] = "cas:u1";
    reg.append(std::move(e));

    e = ev(EventKind::Enqueue);
    e.task = "first";
    e.wire = "in";
    e.av = "v1";
    reg.append(std::move(e));

    e = ev(EventKind::Assemble);
    e.task = "first";
    e.key = "snapkey-first-1";
    e.inputs = {"v1"};
    e.extra["policy"] = "all_new";
    reg.append(std::move(e));

    e = ev(EventKind::ExecStart);
    e.task = "first";
    e.key = "snapkey-first-1";
    e.inputs = {"v1"};
    e.extra["exec_n"] = 1;
    e.extra["code_version"] = "v1";
    e.extra["cache_key"] = "cachekey-first";
    reg.append(std::move(e));

    e = ev(EventKind::Mint);
    e.task = "first";
    e.wire = "mid";
    e.av = "v2";
    e.extra["uri"] = "cas:u2";
    e.extra["exec_n"] = 1;
    e.extra["code_version"] = "v1";
    reg.append(std::move(e));

    e = ev(EventKind::ExecEnd);
    e.task = "first";
    e.outputs = {"v2"};
    e.key = "cachekey-first";
    e.extra["exec_n"] = 1;
    e.extra["snapshot_key"] = "snapkey-first-1";
    e.extra["exit"] = 0;
    e.extra["duration_ms"] = 5;
    reg.append(std::move(e));

    e = ev(EventKind::Enqueue);
    e.task = "second";
    e.wire = "mid";
    e.av = "v2";
    reg.append(std::move(e));

    e = ev(EventKind::Assemble);
    e.task = "second";
    e.key = "snapkey-second-1";
    e.inputs = {"v2"};
    e.extra["policy"] = "all_new";
    reg.append(std::move(e));

    e = ev(EventKind::ImplicitLookup);
    e.task = "second";
    e.wire = "svc";
    e.key = "feeddad0feeddad0";
    e.extra["exec_n"] = 1;
    reg.append(std::move(e));

    e = ev(EventKind::ExecStart);
    e.task = "second";
    e.key = "snapkey-second-1";
    e.inputs = {"v2"};
    e.extra["exec_n"] = 1;
    e.extra["code_version"] = "v3";
    e.extra["cache_key"] = "cachekey-second";
    reg.append(std::move(e));

    e = ev(EventKind::Mint);
    e.task = "second";
    e.wire = "out";
    e.av = "v3";
    e.extra["uri"] = "cas:u3";
    e.extra["exec_n"] = 1;
    e.extra["code_version"] = "v3";
    reg.append(std::move(e));

    e = ev(EventKind::ExecEnd);
    e.task = "second";
    e.outputs = {"v3"};
    e.key = "cachekey-second";
    e.extra["exec_n"] = 1;
    e.extra["snapshot_key"] = "snapkey-second-1";
    e.extra["exit"] = 0;
    e.extra["duration_ms"] = 7;
    reg.append(std::move(e));

    // The repeat: same bytes on `in`, so `first` is served from cache.
    e = ev(EventKind::Ingest);
    e.wire = "in";
    e.av = "v4";
    e.extra["uri"] = "cas:u1";
    reg.append(std::move(e));

    e = ev(EventKind::Assemble);
    e.task = "first";
    e.key = "snapkey-first-2";
    e.inputs = {"v4"};
    e.extra["policy"] = "all_new";
    reg.append(std::move(e));

    e = ev(EventKind::Mint);
    e.task = "first";
    e.wire = "mid";
    e.av = "v5";
    e.extra["uri"] = "cas:u2";
    e.extra["exec_n"] = 2;
    e.extra["code_version"] = "v1";
    reg.append(std::move(e));

    e = ev(EventKind::CacheHit);
    e.task = "first";
    e.inputs = {"v4"};
    e.outputs = {"v5"};
    e.key = "cachekey-first";
    e.extra["exec_n"] = 2;
    e.extra["snapshot_key"] = "snapkey-first-2";
    reg.append(std::move(e));
}

} // namespace

TEST_CASE("append assigns dense sequence numbers and survives reload") {
    testutil::TempDir dir("reg");
    auto file = dir.path() / "registry.jsonl";
    {
        Registry reg(file);
        seed_chain(reg);
        CHECK(reg.events().front().seq == 1);
        CHECK(reg.events().back().seq == static_cast<int64_t>(reg.count()));
    }

    Registry back(file);
    CHECK(back.count() == 16);
    CHECK(back.events()[0].kind == EventKind::Ingest);
    CHECK(back.events()[0].av == "v1");
    CHECK(back.events()[5].extra.value("exit", -1) == 0);

    // Appending after a reload continues the same dense numbering.
    ProvenanceEvent extra;
    extra.kind = EventKind::Evict;
    extra.key = "cas:u2";
    int64_t seq = back.append(std::move(extra));
    CHECK(seq == 17);
}

TEST_CASE("the file format defends its header") {
    testutil::TempDir dir("reg");

    auto bad = dir.path() / "noheader.jsonl";
    testutil::write_file(bad.string(), "{\"seq\":1,\"at\":0,\"kind\":\"ingest\"}\n");
    CHECK_THROWS_AS(Registry{bad}, ConfigError);

    auto vers = dir.path() / "future.jsonl";
    testutil::write_file(vers.string(), "{\"format\":\"loom-registry\",\"version\":99}\n");
    CHECK_THROWS_AS(Registry{vers}, ConfigError);

    auto garbled = dir.path() / "garbled.jsonl";
    testutil::write_file(garbled.string(),
                         "{\"format\":\"loom-registry\",\"version\":1}\nnot json\n");
    CHECK_THROWS_AS(Registry{garbled}, ConfigError);

    auto unknown = dir.path() / "unknown.jsonl";
    testutil::write_file(unknown.string(),
                         "{\"format\":\"loom-registry\",\"version\":1}\n"
                         "{\"seq\":1,\"at\":0,\"kind\":\"teleport\"}\n");
    CHECK_THROWS_AS(Registry{unknown}, ConfigError);
}

TEST_CASE("traveller walks a value back to its ingress") {
    Registry reg;
    seed_chain(reg);

    std::string log = reg.traveller("v3");
    CHECK(log.find("traveller log for value v3") == 0);
    CHECK(log.find("via execution second#1  snapshot=snapkey-seco") != std::string::npos);
    CHECK(log.find("lookup svc sha256:feeddad0feed") != std::string::npos);
    CHECK(log.find("via execution first#1") != std::string::npos);
    CHECK(log.find("wire=in  ingested") != std::string::npos);

    // Deeper hops indent by four spaces each; the root is unindented.
    CHECK(log.find("\nvalue v3  wire=out") != std::string::npos);
    CHECK(log.find("\n    value v2") != std::string::npos);
    CHECK(log.find("\n        value v1") != std::string::npos);

    CHECK_THROWS_AS(reg.traveller("v999"), NotFoundError);
}

TEST_CASE("a cache-served value names the execution it replays") {
    Registry reg;
    seed_chain(reg);

    std::string log = reg.traveller("v5");
    CHECK(log.find("via cache hit first#2") != std::string::npos);
    CHECK(log.find("snapshot=snapkey-firs") != std::string::npos);
    CHECK(log.find("replays=snapkey-firs") != std::string::npos);
    // The hit consumed v4, not the original v1.
    CHECK(log.find("value v4") != std::string::npos);
    CHECK(log.find("value v1") == std::string::npos);
}

TEST_CASE("checkpoint numbers each execution attempt with subtime indent") {
    Registry reg;
    seed_chain(reg);

    std::string log = reg.checkpoint("first");
    CHECK(log.find("New process timeline for ( first )") == 0);
    CHECK(log.find(std::string(90, '-')) != std::string::npos);
    CHECK(log.find("|    0 -->   1,1") != std::string::npos); // first assemble
    CHECK(log.find("|       ->   1,2") != std::string::npos); // exec under it
    CHECK(log.find("|    1 -->   2,1") != std::string::npos); // second attempt
    CHECK(log.find("[exec: #1 version v1]") != std::string::npos);
    CHECK(log.find("[minted: mid v2]") != std::string::npos);
    CHECK(log.find("[exit: 0 in 5ms]") != std::string::npos);
    CHECK(log.find("[cache: hit cachekey-fir]") != std::string::npos);
    CHECK(log.find("2020-01-01 00:00:00 +0000 UTC") != std::string::npos);

    std::string second = reg.checkpoint("second");
    CHECK(second.find("[lookup: svc sha256:feeddad0feed]") != std::string::npos);

    CHECK_THROWS_AS(reg.checkpoint("nobody"), NotFoundError);
}

TEST_CASE("concept edges relate tasks, files, and services without duplicates") {
    Registry reg;
    seed_chain(reg);

    auto edges = reg.concept_edges();
    std::set<ConceptEdge> set(edges.begin(), edges.end());
    CHECK(set.size() == edges.size()); // deduplicated
    CHECK(set.count({"first", "second", "precedes"}));
    CHECK(set.count({"first", "[file: in]", "may_determine"}));
    CHECK(set.count({"second", "[service: svc]", "may_determine"}));

    std::string map = reg.concept_map();
    CHECK(map.find("<begin NON-LOCAL CAUSE>") == 0);
    CHECK(map.find("(first) --b(precedes)--> \"second\"") != std::string::npos);
    CHECK(map.find("(second) --b(may determine)--> \"[service: svc]\"") !=
          std::string::npos);
    CHECK(map.rfind("<end NON-LOCAL CAUSE>\n") == map.size() - 22);

    // `second` sits one causal hop deeper, so its lines are indented.
    CHECK(map.find("\n  (second)") != std::string::npos);
}

TEST_CASE("queries filter flat fields and follow causality for values") {
    Registry reg;
    seed_chain(reg);

    CHECK(reg.query("kind", "ingest").size() == 2);
    CHECK(reg.query("kind", "cache_hit").size() == 1);
    CHECK(reg.query("task", "second").size() == 6);
    CHECK(reg.query("wire", "mid").size() == 3); // two mints + one enqueue
    CHECK(reg.query("key", "cachekey-first").size() == 2); // exec_end + hit
    CHECK_THROWS_AS(reg.query("kind", "teleport"), ConfigError);
    CHECK_THROWS_AS(reg.query("galaxy", "x"), ConfigError);

    // The av field returns the backward closure in sequence order.
    auto closure = reg.query("av", "v3");
    auto direct = reg.causal_closure("v3");
    CHECK(closure == direct);
    REQUIRE(!closure.empty());
    for (size_t i = 1; i < closure.size(); ++i)
        CHECK(closure[i - 1]->seq < closure[i]->seq);

    // It reaches through the chain: both executions and the first ingest.
    std::set<int64_t> seqs;
    for (const auto* ev : closure) seqs.insert(ev->seq);
    CHECK(seqs.count(1));  // ingest v1
    CHECK(seqs.count(4));  // exec_start first#1
    CHECK(seqs.count(9));  // implicit lookup
    CHECK(!seqs.count(16)); // the cache hit is not in v3's past
}

TEST_CASE("replaying the file reproduces every rendering byte for byte") {
    testutil::TempDir dir("reg");
    auto file = dir.path() / "registry.jsonl";
    Registry live(file);
    seed_chain(live);

    std::string trav = live.traveller("v3");
    std::string chk1 = live.checkpoint("first");
    std::string chk2 = live.checkpoint("second");
    std::string map = live.concept_map();

    Registry replayed(file);
    CHECK(replayed.traveller("v3") == trav);
    CHECK(replayed.checkpoint("first") == chk1);
    CHECK(replayed.checkpoint("second") == chk2);
    CHECK(replayed.concept_map() == map);
}
