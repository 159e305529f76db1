#include <algorithm>

#include "cgnn/instrument.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/oracles.hpp"

using namespace cgnn;
using namespace cgnn::testing;
namespace fs = std::filesystem;

namespace {

ProgramGraph build_dir(const fs::path& dir) {
  ParseResult r = parse_project(dir.string());
  REQUIRE(r.diagnostics.empty());
  const std::set<std::string> k(default_prune_kinds().begin(), default_prune_kinds().end());
  return link_identifiers(prune(r.graph, k));
}

std::string event(const std::string& callee_file, uint32_t callee_start,
                  const std::optional<std::string>& caller_file, uint32_t line, uint32_t col) {
  nlohmann::json j = {{"callee_file", callee_file}, {"callee_start", callee_start}};
  j["caller_file"] = caller_file ? nlohmann::json(*caller_file) : nlohmann::json(nullptr);
  j["caller_line"] = line;
  j["caller_col"] = col;
  return j.dump() + "\n";
}

// Runs a node script in dir, returning stdout or "<exit N>".
std::string node_output(const fs::path& dir, const std::string& entry,
                        const std::string& env = "") {
  const fs::path out = dir / "__stdout.txt";
  const int rc = run_command("cd '" + dir.string() + "' && " + env + " node " + entry +
                             " > '" + out.string() + "' 2>&1");
  std::string s = read_file(out);
  fs::remove(out);
  return rc == 0 ? s : "<exit " + std::to_string(rc) + "> " + s;
}

}  // namespace

TEST_CASE("hooks are spliced into function bodies without new lines") {
  std::vector<Insertion> shifts;
  size_t fns = 0;
  const std::string src = "function f(){ return 1 }\nconst g = x => x+1;\n";
  const std::string out = instrument_source("a.js", src, false, "./__cg_shim.cjs", &shifts, &fns);
  CHECK(fns == 2);
  CHECK(std::count(out.begin(), out.end(), '\n') == std::count(src.begin(), src.end(), '\n'));
  CHECK(out.find("__cg_log") != std::string::npos);
  CHECK(out.find("return 1") != std::string::npos);
  CHECK(shifts.size() >= 3);
}

TEST_CASE("offsets of line and UTF-16 column positions") {
  const std::string text = "ab\nx\xC3\xA9y\n\xF0\x9F\x98\x80z";
  CHECK(offset_of(text, 1, 1) == 0u);
  CHECK(offset_of(text, 1, 2) == 1u);
  CHECK(offset_of(text, 2, 1) == 3u);
  CHECK(offset_of(text, 2, 3) == 6u);  // é is two bytes, one UTF-16 unit
  CHECK(offset_of(text, 3, 3) == 12u);  // the emoji is a surrogate pair
  CHECK_FALSE(offset_of(text, 9, 1).has_value());
}

TEST_CASE("site maps round trip through JSON") {
  SiteMap m = {{"a.js:0:10", 3}, {"dir/b.js:4:9", 17}};
  CHECK(site_map_from_json(site_map_to_json(m, "{\"seed\":1}")) == m);
}

TEST_CASE("trace parsing: empty, duplicates, native and external frames") {
  const fs::path dir = fresh_temp_dir("trace-unit");
  const std::string src = "function f() { return 1; }\nf();\nf();\n";
  write_file(dir / "a.js", src);
  const ProgramGraph g = build_dir(dir);
  const InstrumentResult ir = instrument_project(dir.string(), (dir / "out").string());

  CHECK(parse_traces("", ir.site_map, g, dir.string()).edges.empty());

  const std::string ev = event("a.js", 0, std::string("a.js"), 2, 1);
  const TraceParseResult r = parse_traces(ev + ev + ev, ir.site_map, g, dir.string());
  REQUIRE(r.edges.size() == 1);
  CHECK(r.edges.edges.begin()->second.count == 3);
  CHECK(r.edges.edges.begin()->second.provenance == kDynamic);

  const std::string mixed = event("a.js", 0, std::nullopt, 0, 0) +
                            event("a.js", 0, std::string("/usr/lib/node/x.js"), 1, 1) +
                            event("a.js", 0, std::string("a.js"), 3, 2);
  const TraceParseResult m = parse_traces(mixed, ir.site_map, g, dir.string());
  CHECK(m.native_dropped == 1);
  CHECK(m.external_dropped == 1);
  CHECK(m.edges.size() == 1);

  const TraceParseResult bad =
      parse_traces(event("a.js", 0, std::string("a.js"), 1, 1), ir.site_map, g, dir.string());
  CHECK(bad.unmapped == 1);
  CHECK(bad.diagnostics.size() == 1);
  fs::remove_all(dir);
}

TEST_CASE("callers inside argument lists map to the innermost call") {
  const fs::path dir = fresh_temp_dir("trace-nested");
  const std::string src = "function a(x) { return x; }\nfunction b() { return 2; }\na(b(), a(b()));\n";
  write_file(dir / "n.js", src);
  const ProgramGraph g = build_dir(dir);
  const InstrumentResult ir = instrument_project(dir.string(), (dir / "out").string());
  const uint32_t line3 = static_cast<uint32_t>(src.find("a(b()"));
  for (uint32_t col = 1; line3 + col - 1 < src.size() - 1; ++col) {
    const uint32_t off = line3 + col - 1;
    std::optional<NodeId> want;
    uint32_t best = UINT32_MAX;
    for (const SyntaxNode& n : g.nodes) {
      if (n.kind != "CallExpression" || n.start > off || n.end <= off) continue;
      if (n.end - n.start < best) {
        best = n.end - n.start;
        want = n.id;
      }
    }
    const TraceParseResult r =
        parse_traces(event("n.js", 0, std::string("n.js"), 3, col), ir.site_map, g, dir.string());
    if (!want) {
      CHECK(r.edges.empty());
      continue;
    }
    REQUIRE(r.edges.size() == 1);
    CHECK(r.edges.edges.begin()->first.first == *want);
  }
  fs::remove_all(dir);
}

TEST_CASE("unparseable files are copied verbatim with a diagnostic") {
  const fs::path dir = fresh_temp_dir("instr-bad");
  write_file(dir / "ok.js", "function f() { return 1; }\n");
  write_file(dir / "bad.js", "function (\n");
  write_file(dir / "notes.txt", "plain");
  const InstrumentResult ir = instrument_project(dir.string(), (dir / "out").string());
  CHECK(ir.diagnostics.size() == 1);
  CHECK(read_file(dir / "out" / "bad.js") == "function (\n");
  CHECK(read_file(dir / "out" / "notes.txt") == "plain");
  CHECK(fs::exists(dir / "out" / kShimFile));
  CHECK(fs::exists(dir / "out" / kSiteMapFile));
  CHECK(ir.files_instrumented == 1);
  fs::remove_all(dir);
}

TEST_CASE("instrumented code computes the same values under node") {
  if (!node_available()) {
    MESSAGE("node not installed; skipping");
    return;
  }
  const fs::path dir = fresh_temp_dir("instr-run");
  write_file(dir / "main.js",
             "function f(){ return 1 }\nconst inc = x => x+1;\nconst sq = (x) => x * x;\n"
             "const obj = { k: (a, b) => ({ a, b }) };\n"
             "for (const v of [-2, 0, 3, 10.5]) console.log(f(), inc(v), sq(v), JSON.stringify(obj.k(v, 1)));\n");
  const InstrumentResult ir = instrument_project(dir.string(), (dir / "out").string());
  CHECK(ir.functions_instrumented == 4);
  const std::string orig = node_output(dir, "main.js");
  const std::string inst = node_output(dir / "out", "main.js");
  CHECK(orig.rfind("1 -1 4", 0) == 0);
  CHECK(orig == inst);
  fs::remove_all(dir);
}

TEST_CASE("running the instrumented figs fixture logs showPosition") {
  if (!node_available()) {
    MESSAGE("node not installed; skipping");
    return;
  }
  const fs::path figs = fixtures_dir() / "figs";
  const fs::path dir = fresh_temp_dir("instr-figs");
  const InstrumentResult ir = instrument_project(figs.string(), (dir / "out").string());
  const fs::path trace = dir / "trace.ndjson";
  node_output(dir / "out", "run.js", "CG_TRACE_OUT='" + trace.string() + "'");
  const std::string src = read_file(figs / "callee.js");
  const uint32_t start = static_cast<uint32_t>(src.find("function () {\n      var pre"));
  size_t hits = 0;
  std::istringstream in(read_file(trace));
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    hits += j["callee_file"] == "callee.js" && j["callee_start"] == start;
  }
  CHECK(hits == 1);
  const ProgramGraph g = build_dir(figs);
  bool keyed = false;
  for (const auto& [key, id] : ir.site_map)
    keyed |= key.rfind("callee.js:" + std::to_string(start) + ":", 0) == 0 &&
             g.node(id).kind == "FunctionExpression";
  CHECK(keyed);
  fs::remove_all(dir);
}
