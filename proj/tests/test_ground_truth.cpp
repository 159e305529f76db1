#include <cmath>

#include "cgnn/error.hpp"
#include "cgnn/ground_truth.hpp"
#include "cgnn/js/ast.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cgnn;
using namespace cgnn::testing;

namespace {

ProgramGraph build(const std::string& src, const std::string& file = "a.js") {
  ParseResult r = parse_sources({{file, src}});
  REQUIRE(r.diagnostics.empty());
  const std::set<std::string> k(default_prune_kinds().begin(), default_prune_kinds().end());
  return link_identifiers(prune(r.graph, k));
}

std::string record(const std::string& file, uint32_t cs, uint32_t ce, uint32_t fs,
                   uint32_t fe) {
  return nlohmann::json{{"caller", {{"file", file}, {"start", cs}, {"end", ce}}},
                        {"callee", {{"file", file}, {"start", fs}, {"end", fe}}},
                        {"provenance", "static"},
                        {"count", 0}}
      .dump();
}

const SyntaxNode& first_of(const ProgramGraph& g, const std::string& kind) {
  for (const SyntaxNode& n : g.nodes)
    if (n.kind == kind) return n;
  FAIL("no node of kind " << kind);
  throw std::logic_error("unreachable");
}

}  // namespace

TEST_CASE("empty export ingests to nothing") {
  const ProgramGraph g = build("f();");
  const IngestResult r = ingest_static_edges(parse_edge_file(""), g);
  CHECK(r.edges.empty());
  CHECK(r.diagnostics.empty());
}

TEST_CASE("exact call span resolves to that call") {
  const std::string src = "function f() {}\nf();";
  const ProgramGraph g = build(src);
  const SyntaxNode& call = first_of(g, "CallExpression");
  const SyntaxNode& fn = first_of(g, "FunctionDeclaration");
  const IngestResult r = ingest_static_edges(
      parse_edge_file(record("a.js", call.start, call.end, fn.start, fn.end)), g);
  REQUIRE(r.edges.size() == 1);
  CHECK(r.edges.contains(call.id, fn.id));
}

TEST_CASE("positions inside arguments resolve to the innermost call") {
  const std::string src =
      "function a(x, y) { return x; }\nfunction b(z) { return z; }\n"
      "a(b(a(1, b(2))), b(b(3)));\n";
  const ProgramGraph g = build(src);
  const SyntaxNode& fn = first_of(g, "FunctionDeclaration");
  for (uint32_t p = 0; p + 1 < src.size(); ++p) {
    std::optional<NodeId> want;
    uint32_t best = UINT32_MAX;
    for (const SyntaxNode& n : g.nodes) {
      if (n.kind != "CallExpression" || n.start > p || n.end < p + 1) continue;
      if (n.end - n.start < best) {
        best = n.end - n.start;
        want = n.id;
      }
    }
    const SpanIndex idx(g, SpanIndex::Role::kCallSite);
    CHECK(idx.enclosing("a.js", p, p + 1) == want);
    if (!want) continue;
    const IngestResult r =
        ingest_static_edges(parse_edge_file(record("a.js", p, p + 1, fn.start, fn.end)), g);
    CHECK(r.edges.contains(*want, fn.id));
  }
}

TEST_CASE("malformed records become diagnostics") {
  const std::string src = "function f() {}\nf();";
  const ProgramGraph g = build(src);
  const SyntaxNode& call = first_of(g, "CallExpression");
  const SyntaxNode& fn = first_of(g, "FunctionDeclaration");
  const std::string ok = record("a.js", call.start, call.end, fn.start, fn.end);
  const EdgeFile f = parse_edge_file(ok + "\n{not json\n" + ok + "\n" + ok + "\n");
  CHECK(f.records.size() == 3);
  CHECK(f.diagnostics.size() == 1);
  const IngestResult r = ingest_static_edges(f, g);
  CHECK(r.unresolved == 1);
  CHECK(r.edges.size() == 1);
}

TEST_CASE("mostly unresolvable exports are rejected") {
  const ProgramGraph g = build("function f() {}\nf();");
  const std::string bad = record("other.js", 0, 3, 0, 3);
  try {
    ingest_static_edges(parse_edge_file(bad + "\n" + bad + "\n"), g);
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
  }
}

TEST_CASE("edge files round trip through ingest") {
  const ProgramGraph g = synthetic_graph({});
  const CallEdgeSet truth = name_match_edges(g);
  const IngestResult r =
      ingest_static_edges(parse_edge_file(edges_to_ndjson(g, truth, "{}")), g);
  CHECK(r.unresolved == 0);
  CHECK(r.edges.size() == truth.size());
  for (const auto& [key, e] : truth.edges) CHECK(r.edges.contains(key.first, key.second));
}

TEST_CASE("heuristic resolves a direct call of a declaration") {
  const ProgramGraph g = build("function f(){}; f();");
  const CallEdgeSet s = heuristic_static_resolve(g);
  REQUIRE(s.size() == 1);
  CHECK(s.edges.begin()->first.second == first_of(g, "FunctionDeclaration").id);
}

TEST_CASE("heuristic follows a variable bound to a function expression") {
  const ProgramGraph g = build("var g = function(){}; g();");
  const CallEdgeSet s = heuristic_static_resolve(g);
  REQUIRE(s.size() == 1);
  CHECK(s.edges.begin()->first.second == first_of(g, "FunctionExpression").id);
}

TEST_CASE("heuristic resolves a method of a same-file object literal") {
  const ProgramGraph g = build("var o = { m: function () { return 1; } };\no.m();");
  const CallEdgeSet s = heuristic_static_resolve(g);
  REQUIRE(s.size() == 1);
  CHECK(s.edges.begin()->first.second == first_of(g, "FunctionExpression").id);
}

TEST_CASE("heuristic stays silent under ambiguity") {
  CHECK(heuristic_static_resolve(build("function f(){}\nfunction f(){}\nf();")).empty());
  CHECK(heuristic_static_resolve(build("var g = function(){};\ng = function(){};\ng();")).empty());
  CHECK(heuristic_static_resolve(build("function f(){}\nfunction h(f) { f(); }")).empty());
}

TEST_CASE("heuristic leaves the figs call unresolved") {
  ParseResult r = parse_project((fixtures_dir() / "figs").string());
  const std::set<std::string> k(default_prune_kinds().begin(), default_prune_kinds().end());
  const ProgramGraph g = link_identifiers(prune(r.graph, k));
  const CallEdgeSet s = heuristic_static_resolve(g);
  for (const auto& [key, e] : s.edges) {
    const SyntaxNode& cs = g.node(key.first);
    CHECK(cs.ref_name != "showPosition");
  }
}

TEST_CASE("merge is a keyed union") {
  const ProgramGraph g = synthetic_graph({});
  const CallEdgeSet truth = name_match_edges(g);
  CallEdgeSet a, b;
  size_t i = 0;
  for (const auto& [key, e] : truth.edges) {
    CallEdge d = e;
    if (i++ % 2) {
      d.provenance = kDynamic;
      d.count = 3;
      b.add(d);
    } else {
      a.add(d);
    }
  }
  const CallEdgeSet ab = merge_edge_sets(g, {a, b});
  CHECK(ab.size() == a.size() + b.size());
  const CallEdgeSet a0 = merge_edge_sets(g, {a, CallEdgeSet{}});
  CHECK(a0.list().size() == a.size());
  const CallEdgeSet bb = merge_edge_sets(g, {b, b});
  CHECK(bb.size() == b.size());
  for (const auto& [key, e] : bb.edges) CHECK(e.count == 6);
  const CallEdgeSet mixed = merge_edge_sets(g, {a, ab});
  for (const auto& [key, e] : mixed.edges)
    CHECK(e.provenance == (a.contains(key.first, key.second) ? kStatic : kDynamic));
  CallEdgeSet bad;
  bad.add({g.root, g.root, kStatic, 0});
  CHECK_THROWS_AS(merge_edge_sets(g, {bad}), Error);
}

TEST_CASE("negative sampling edge cases") {
  const ProgramGraph g = build("function f(){}\nfunction h(){}\nf();");
  const Endpoints ep = enumerate_endpoints(g);
  REQUIRE(ep.call_sites.size() == 1);
  REQUIRE(ep.function_defs.size() == 2);
  CallEdgeSet pos;
  pos.add({ep.call_sites[0], ep.function_defs[0], kStatic, 0});
  CHECK(sample_negatives(g, pos, 0, 1).empty());
  const auto one = sample_negatives(g, pos, 1, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == std::make_pair(ep.call_sites[0], ep.function_defs[1]));
  CHECK_THROWS_AS(sample_negatives(g, pos, 2, 1), Error);
}

TEST_CASE("negatives avoid positives and are uniform over non-edges") {
  const ProgramGraph g = synthetic_graph({});
  const CallEdgeSet pos = name_match_edges(g);
  const Endpoints ep = enumerate_endpoints(g);
  const size_t free = ep.call_sites.size() * ep.function_defs.size() - pos.size();
  const int seeds = 50;
  const size_t n = 1000;
  std::map<std::pair<NodeId, NodeId>, int> hits;
  for (int s = 0; s < seeds; ++s) {
    const auto neg = sample_negatives(g, pos, n, 1000 + s);
    REQUIRE(neg.size() == n);
    std::set<std::pair<NodeId, NodeId>> uniq(neg.begin(), neg.end());
    CHECK(uniq.size() == n);
    for (const auto& p : neg) {
      CHECK_FALSE(pos.contains(p.first, p.second));
      ++hits[p];
    }
  }
  CHECK(sample_negatives(g, pos, n, 7) == sample_negatives(g, pos, n, 7));
  // Each non-edge is drawn in a given seed with probability n/free.
  const double q = static_cast<double>(n) / free;
  const double mean = seeds * q, sd = std::sqrt(seeds * q * (1 - q));
  size_t outside = 0;
  for (NodeId cs : ep.call_sites) {
    for (NodeId fn : ep.function_defs) {
      if (pos.contains(cs, fn)) continue;
      const auto it = hits.find({cs, fn});
      const double c = it == hits.end() ? 0.0 : it->second;
      outside += std::abs(c - mean) > 3 * sd;
    }
  }
  CHECK(static_cast<double>(outside) / free < 0.01);
}
