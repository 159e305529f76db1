#include <algorithm>
#include <atomic>
#include <thread>

#include "cgnn/error.hpp"
#include "cgnn/triage.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support/oracles.hpp"

using namespace cgnn;
using namespace cgnn::testing;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Fixture {
  ProgramGraph graph;
  CallEdgeSet static_edges;
  std::shared_ptr<const ModelParams> params;
  fs::path dir;

  Fixture() {
    ParseResult r = parse_project((fixtures_dir() / "figs").string());
    const std::set<std::string> k(default_prune_kinds().begin(), default_prune_kinds().end());
    graph = link_identifiers(prune(r.graph, k));
    static_edges = heuristic_static_resolve(graph);
    Hyperparams hp;
    hp.hidden = 8;
    hp.layers = 2;
    hp.name_buckets = 32;
    hp.seed = 4;
    params = std::make_shared<const ModelParams>(init_model(hp));
    dir = fresh_temp_dir("triage");
  }
  ~Fixture() { fs::remove_all(dir); }

  std::unique_ptr<TriageService> open(const std::string& log = "log.ndjson") const {
    return std::make_unique<TriageService>(graph, static_edges, params, static_edges,
                                           (dir / log).string());
  }
  NodeId show_position_call() const {
    for (NodeId cs : enumerate_endpoints(graph).call_sites)
      if (graph.node(cs).ref_name == "showPosition") return cs;
    FAIL("no showPosition call");
    return 0;
  }
  NodeId function_def(size_t i) const { return enumerate_endpoints(graph).function_defs.at(i); }
};

TriageDecision decision(NodeId cs, std::optional<NodeId> callee, const std::string& verdict,
                        const std::string& ts) {
  TriageDecision d;
  d.callsite = cs;
  d.callee = callee;
  d.verdict = verdict;
  d.analyst = "t";
  d.timestamp = ts;
  return d;
}

std::string ts(int second, int ms = 0) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "2024-05-01T12:%02d:%02d.%03dZ", second / 60, second % 60, ms);
  return buf;
}

}  // namespace

TEST_CASE("timestamps compare as instants") {
  CHECK(compare_timestamps("2024-05-01T12:00:00Z", "2024-05-01T12:00:00.000Z") == 0);
  CHECK(compare_timestamps("2024-05-01T12:00:00Z", "2024-05-01T12:00:00.5Z") < 0);
  CHECK(compare_timestamps("2024-05-01T14:00:00+02:00", "2024-05-01T12:00:00Z") == 0);
  CHECK(compare_timestamps("2024-12-31T23:59:59Z", "2025-01-01T00:00:00Z") < 0);
  CHECK_THROWS_AS(compare_timestamps("yesterday", "2024-05-01T12:00:00Z"), Error);
  CHECK(compare_timestamps(utc_now(), "2020-01-01T00:00:00Z") > 0);
}

TEST_CASE("decision records parse and validate") {
  const TriageDecision d = decision_from_json(
      R"({"callsite": 4, "callee": 9, "verdict": "accepted", "analyst": "x"})");
  CHECK(d.callsite == 4);
  CHECK(d.callee == 9u);
  CHECK(d.timestamp.empty());
  CHECK(decision_from_json(decision_to_json(d)).callee == 9u);
  CHECK_THROWS_AS(decision_from_json(R"({"callsite": 4, "verdict": "accepted"})"), Error);
  CHECK_THROWS_AS(decision_from_json(R"({"callsite": 4, "verdict": "maybe"})"), Error);
  CHECK_THROWS_AS(decision_from_json("[]"), Error);
  CHECK_THROWS_AS(decision_from_json(R"({"callsite": 4, "verdict": "skipped", "timestamp": "x"})"),
                  Error);
}

TEST_CASE("unresolved sites are the call sites without a static edge") {
  Fixture fx;
  const auto svc = fx.open();
  std::set<NodeId> resolved;
  for (const auto& [key, e] : fx.static_edges.edges) resolved.insert(key.first);
  const auto sites = svc->list_unresolved();
  CHECK(sites.size() == enumerate_endpoints(fx.graph).call_sites.size() - resolved.size());
  bool found = false;
  for (size_t i = 0; i < sites.size(); ++i) {
    CHECK_FALSE(resolved.count(sites[i].id));
    if (i) CHECK(std::tie(sites[i - 1].file, sites[i - 1].start) <= std::tie(sites[i].file, sites[i].start));
    if (sites[i].id == fx.show_position_call()) {
      found = true;
      CHECK(sites[i].file == "caller.js");
      REQUIRE(sites[i].excerpt);
      CHECK(sites[i].excerpt->find("showPosition") != std::string::npos);
    }
  }
  CHECK(found);
  const auto j = json::parse(svc->unresolved_json());
  CHECK(j["count"] == sites.size());
}

TEST_CASE("a fully resolved project lists nothing") {
  Fixture fx;
  CallEdgeSet all;
  for (NodeId cs : enumerate_endpoints(fx.graph).call_sites) all.add({cs, fx.function_def(0), kStatic, 0});
  const TriageService svc(fx.graph, all, nullptr, {}, (fx.dir / "x.ndjson").string());
  CHECK(svc.list_unresolved().empty());
  CHECK_THROWS_AS(svc.get_candidates(fx.show_position_call(), 3), Error);
}

TEST_CASE("candidate lists follow the model ranking") {
  Fixture fx;
  const auto svc = fx.open();
  const NodeId cs = fx.show_position_call();
  const size_t n = enumerate_endpoints(fx.graph).function_defs.size();
  const CandidateRanking all = svc->get_candidates(cs, n + 10);
  CHECK(all.candidates.size() == n);
  CHECK(all.n == n);
  for (size_t i = 1; i < all.candidates.size(); ++i)
    CHECK(all.candidates[i - 1].second >= all.candidates[i].second);
  const CandidateRanking direct = rank_callsite(*fx.params, fx.graph, &fx.static_edges, cs, std::nullopt, 0);
  CHECK(direct.candidates == all.candidates);
  const CandidateRanking top = svc->get_candidates(cs, 1);
  REQUIRE(top.candidates.size() == 1);
  CHECK(top.candidates[0] == all.candidates[0]);
  try {
    svc->get_candidates(fx.graph.root, 3);
    FAIL("expected not found");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kNotFound);
  }
}

TEST_CASE("accepted decisions are exported and superseded by later ones") {
  Fixture fx;
  const auto svc = fx.open();
  CHECK(svc->export_augmented().all.size() == fx.static_edges.size());
  CHECK(svc->export_augmented().analyst.empty());

  const NodeId cs = fx.show_position_call();
  const NodeId f0 = fx.function_def(0), f1 = fx.function_def(1);
  const TriageDecision d1 = svc->record_decision(decision(cs, f0, "accepted", ts(1)));
  CHECK(d1.id == 1);
  AugmentedEdges a = svc->export_augmented();
  CHECK(a.all.size() == fx.static_edges.size() + 1);
  CHECK(a.analyst.contains(cs, f0));
  CHECK(a.all.edges.at({cs, f0}).provenance == kAnalyst);

  svc->record_decision(decision(cs, f1, "accepted", ts(2)));
  a = svc->export_augmented();
  CHECK(a.analyst.size() == 1);
  CHECK(a.analyst.contains(cs, f1));

  svc->record_decision(decision(cs, std::nullopt, "rejected", ts(3)));
  CHECK(svc->export_augmented().analyst.empty());
  // An older timestamp arriving later does not win.
  svc->record_decision(decision(cs, f0, "accepted", ts(0)));
  CHECK(svc->export_augmented().analyst.empty());

  const TriageDecision filled = svc->record_decision(decision(cs, f0, "skipped", ""));
  CHECK_FALSE(filled.timestamp.empty());

  CHECK_THROWS_AS(svc->record_decision(decision(cs, fx.graph.root, "accepted", ts(5))), Error);
  CHECK_THROWS_AS(svc->record_decision(decision(f0, f1, "accepted", ts(5))), Error);
  CHECK(svc->decisions().size() == 5);
}

TEST_CASE("folded state equals an in-order replay of random decisions") {
  Fixture fx;
  const auto svc = fx.open();
  const auto calls = enumerate_endpoints(fx.graph).call_sites;
  const auto defs = enumerate_endpoints(fx.graph).function_defs;
  Rng rng(21);
  const char* verdicts[] = {"accepted", "rejected", "skipped"};
  for (int i = 0; i < 100; ++i) {
    const NodeId cs = calls[uniform_index(rng, 3)];
    const std::string v = verdicts[uniform_index(rng, 3)];
    std::optional<NodeId> callee;
    if (v == "accepted" || uniform_unit(rng) < 0.5) callee = defs[uniform_index(rng, defs.size())];
    svc->record_decision(decision(cs, callee, v, ts(static_cast<int>(uniform_index(rng, 30)))));
  }
  const auto log = svc->decisions();
  const auto want = replay_decisions(log);
  const auto got = fold_decisions(log);
  REQUIRE(got.size() == want.size());
  for (const auto& [cs, d] : want) CHECK(got.at(cs).id == d.id);

  CallEdgeSet expect = fx.static_edges;
  for (const auto& [cs, d] : want)
    if (d.verdict == "accepted") expect.add({cs, *d.callee, kAnalyst, 0});
  CHECK(svc->export_augmented().all.size() == expect.size());

  const auto reopened = fx.open();
  const auto again = reopened->decisions();
  REQUIRE(again.size() == log.size());
  for (size_t i = 0; i < log.size(); ++i) CHECK(decision_to_json(again[i]) == decision_to_json(log[i]));
}

TEST_CASE("a log naming an unknown call site is a data error") {
  Fixture fx;
  write_file(fx.dir / "bad.ndjson",
             R"({"callsite": 999999, "callee": null, "verdict": "skipped", "analyst": "", "timestamp": "2024-05-01T12:00:00Z"})"
             "\n");
  try {
    fx.open("bad.ndjson");
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
  }
}

TEST_CASE("exported edges ingest back to the same set") {
  Fixture fx;
  const auto svc = fx.open();
  svc->record_decision(decision(fx.show_position_call(), fx.function_def(1), "accepted", ts(1)));
  const auto j = json::parse(svc->export_json());
  std::string text;
  for (const auto& r : j["edges"]) text += r.dump() + "\n";
  const IngestResult back = ingest_static_edges(parse_edge_file(text), fx.graph);
  CHECK(back.unresolved == 0);
  CHECK(back.edges.list().size() == svc->export_augmented().all.size());
  for (const auto& [key, e] : svc->export_augmented().all.edges)
    CHECK(back.edges.contains(key.first, key.second));
  CHECK(j["analyst_edges"].size() == 1);
}

TEST_CASE("reads run concurrently with writes") {
  Fixture fx;
  const auto svc = fx.open();
  const NodeId cs = fx.show_position_call();
  const NodeId f0 = fx.function_def(0);
  std::atomic<bool> done{false};
  std::atomic<int> reads{0};
  std::vector<std::thread> readers;
  for (int t = 0; t < 3; ++t) {
    readers.emplace_back([&] {
      while (!done) {
        CHECK(json::parse(svc->unresolved_json()).is_object());
        CHECK(json::parse(svc->export_json()).is_object());
        svc->get_candidates(cs, 2);
        ++reads;
      }
    });
  }
  for (int i = 0; i < 40; ++i) svc->record_decision(decision(cs, f0, "accepted", ts(i)));
  while (reads < 3) std::this_thread::yield();
  done = true;
  for (auto& t : readers) t.join();
  const auto log = svc->decisions();
  REQUIRE(log.size() == 40);
  for (size_t i = 0; i < log.size(); ++i) CHECK(log[i].id == i + 1);
}

TEST_CASE("HTTP endpoints speak the v1 protocol") {
  Fixture fx;
  const auto svc = fx.open();
  TriageHttpServer server(*svc, "");
  const int port = server.bind("127.0.0.1", 0);
  REQUIRE(port > 0);
  std::thread th([&] { server.listen(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_connection_timeout(5);

  const NodeId cs = fx.show_position_call();
  auto r = cli.Get("/v1/unresolved");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(json::parse(r->body)["count"] == svc->list_unresolved().size());
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");

  r = cli.Get("/v1/candidates/" + std::to_string(cs) + "?k=3");
  REQUIRE(r);
  CHECK(r->status == 200);
  const auto cj = json::parse(r->body);
  CHECK(cj["candidates"].size() == 3);
  CHECK(cj["candidates"][0]["callee"] == svc->get_candidates(cs, 1).candidates[0].first);

  r = cli.Get("/v1/candidates/4000000");
  REQUIRE(r);
  CHECK(r->status == 404);
  CHECK(json::parse(r->body)["error"]["kind"] == "not_found");
  r = cli.Get("/v1/candidates/abc");
  REQUIRE(r);
  CHECK(r->status == 400);
  r = cli.Get("/v1/candidates/" + std::to_string(cs) + "?k=0");
  REQUIRE(r);
  CHECK(r->status == 400);

  const NodeId f1 = fx.function_def(1);
  r = cli.Post("/v1/decisions",
               json{{"callsite", cs}, {"callee", f1}, {"verdict", "accepted"}, {"analyst", "h"}}.dump(),
               "application/json");
  REQUIRE(r);
  CHECK(r->status == 201);
  CHECK(json::parse(r->body)["id"] == 1);
  r = cli.Post("/v1/decisions", "{oops", "application/json");
  REQUIRE(r);
  CHECK(r->status == 400);

  r = cli.Get("/v1/export?format=ndjson&part=analyst");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(std::count(r->body.begin(), r->body.end(), '\n') == 2);
  r = cli.Get("/v1/export");
  REQUIRE(r);
  CHECK(json::parse(r->body)["analyst_edges"].size() == 1);
  r = cli.Get("/v1/export?format=xml");
  REQUIRE(r);
  CHECK(r->status == 400);

  server.stop();
  th.join();
}
