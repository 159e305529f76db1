#include "cgnn/ground_truth.hpp"

#include <algorithm>
#include <set>
#include <sstream>

#include "cgnn/error.hpp"
#include "cgnn/js/ast.hpp"
#include "json.hpp"

namespace cgnn {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

std::string provenance_name(uint8_t bit) {
  switch (bit) {
    case kStatic:
      return "static";
    case kDynamic:
      return "dynamic";
    case kAnalyst:
      return "analyst";
  }
  return "unknown";
}

std::optional<uint8_t> parse_provenance(std::string_view s) {
  if (s == "static") return kStatic;
  if (s == "dynamic") return kDynamic;
  if (s == "analyst") return kAnalyst;
  return std::nullopt;
}

std::vector<std::string> provenance_names(uint8_t mask) {
  std::vector<std::string> out;
  for (uint8_t bit : {kStatic, kDynamic, kAnalyst}) {
    if (mask & bit) out.push_back(provenance_name(bit));
  }
  return out;
}

void CallEdgeSet::add(const CallEdge& e) {
  auto [it, inserted] = edges.try_emplace({e.callsite, e.callee}, e);
  if (!inserted) {
    it->second.provenance |= e.provenance;
    it->second.count += e.count;
  }
}

std::vector<CallEdge> CallEdgeSet::list() const {
  std::vector<CallEdge> out;
  out.reserve(edges.size());
  for (const auto& [k, e] : edges) out.push_back(e);
  return out;
}

// ---------------------------------------------------------------------------
// Edge files

namespace {

Span parse_span(const json& j) {
  Span s;
  s.file = j.at("file").get<std::string>();
  s.start = j.at("start").get<uint32_t>();
  s.end = j.at("end").get<uint32_t>();
  if (s.end < s.start) throw_data("span end before start");
  return s;
}

ojson span_json(const ProgramGraph& g, NodeId id) {
  const SyntaxNode& n = g.node(id);
  ojson s;
  s["file"] = n.file >= 0 ? g.files[n.file] : "";
  s["start"] = n.start;
  s["end"] = n.end;
  return s;
}

}  // namespace

EdgeFile parse_edge_file(std::string_view text) {
  EdgeFile out;
  std::istringstream in{std::string(text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (j.contains("meta")) continue;
      PositionEdge r;
      r.caller = parse_span(j.at("caller"));
      r.callee = parse_span(j.at("callee"));
      r.provenance = 0;
      if (j.contains("provenances")) {
        for (const auto& p : j["provenances"]) {
          auto bit = parse_provenance(p.get<std::string>());
          if (!bit) throw_data("unknown provenance " + p.dump());
          r.provenance |= *bit;
        }
      }
      if (j.contains("provenance")) {
        auto bit = parse_provenance(j["provenance"].get<std::string>());
        if (!bit) throw_data("unknown provenance " + j["provenance"].dump());
        r.provenance |= *bit;
      }
      if (r.provenance == 0) r.provenance = kStatic;
      r.count = j.value("count", int64_t{0});
      if (r.count < 0) throw_data("negative count");
      out.records.push_back(std::move(r));
    } catch (const std::exception& e) {
      out.diagnostics.push_back(
          {"line " + std::to_string(lineno), std::string("malformed edge record: ") + e.what()});
    }
  }
  return out;
}

EdgeFile read_edge_file(const std::string& path) {
  return parse_edge_file(read_file(path));
}

std::string edges_to_ndjson(const ProgramGraph& graph, const CallEdgeSet& set,
                            const std::string& meta_json) {
  std::string out = "{\"meta\":" + meta_json + "}\n";
  for (const auto& [key, e] : set.edges) {
    ojson r;
    r["caller"] = span_json(graph, e.callsite);
    r["callee"] = span_json(graph, e.callee);
    const auto names = provenance_names(e.provenance);
    r["provenance"] = names.empty() ? "static" : names.front();
    r["count"] = e.count;
    if (names.size() > 1) r["provenances"] = names;
    out += r.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Span resolution

SpanIndex::SpanIndex(const ProgramGraph& graph, Role role) {
  for (const SyntaxNode& n : graph.nodes) {
    if (n.semantic || n.file < 0) continue;
    const bool match = role == Role::kCallSite ? js::is_call_site_kind(n.kind)
                                               : js::is_function_kind(n.kind);
    if (match) by_file_[graph.files[n.file]].push_back({n.start, n.end, n.id});
  }
}

std::optional<NodeId> SpanIndex::enclosing(const std::string& file,
                                           uint32_t start, uint32_t end) const {
  auto it = by_file_.find(file);
  if (it == by_file_.end()) return std::nullopt;
  std::optional<NodeId> best;
  uint32_t best_len = 0;
  for (const Entry& e : it->second) {
    if (e.start > start || end > e.end || start >= e.end) continue;
    const uint32_t len = e.end - e.start;
    // Equal spans: the later (deeper) node wins.
    if (!best || len < best_len || (len == best_len && e.id > *best)) {
      best = e.id;
      best_len = len;
    }
  }
  return best;
}

IngestResult ingest_static_edges(const EdgeFile& file,
                                 const ProgramGraph& graph) {
  IngestResult r;
  r.diagnostics = file.diagnostics;
  r.records = file.records.size() + file.diagnostics.size();
  r.unresolved = file.diagnostics.size();
  const SpanIndex calls(graph, SpanIndex::Role::kCallSite);
  const SpanIndex defs(graph, SpanIndex::Role::kFunctionDef);
  for (size_t i = 0; i < file.records.size(); ++i) {
    const PositionEdge& p = file.records[i];
    auto cs = calls.enclosing(p.caller.file, p.caller.start, p.caller.end);
    auto fn = defs.enclosing(p.callee.file, p.callee.start, p.callee.end);
    if (!cs || !fn) {
      ++r.unresolved;
      r.diagnostics.push_back(
          {"record " + std::to_string(i + 1),
           std::string("unresolvable ") + (!cs ? "caller " : "callee ") +
               (!cs ? p.caller.file + ":" + std::to_string(p.caller.start)
                    : p.callee.file + ":" + std::to_string(p.callee.start))});
      continue;
    }
    r.edges.add({*cs, *fn, p.provenance, p.count});
  }
  if (r.records > 0 && 2 * r.unresolved > r.records) {
    throw_data(std::to_string(r.unresolved) + " of " +
               std::to_string(r.records) +
               " edge records could not be resolved against the graph");
  }
  return r;
}

// ---------------------------------------------------------------------------
// Heuristic resolver

namespace {

struct Binding {
  enum Kind { kFunctionDecl, kVariable, kOther } kind = kOther;
  NodeId owner = 0;
};

class Resolver {
 public:
  explicit Resolver(const ProgramGraph& g)
      : g_(g), children_(g.children_map()) {}

  CallEdgeSet run() {
    collect(g_.root);
    CallEdgeSet out;
    for (const SyntaxNode& n : g_.nodes) {
      if (n.semantic || !js::is_call_site_kind(n.kind)) continue;
      if (auto fn = resolve(n)) out.add({n.id, *fn, kStatic, 0});
    }
    return out;
  }

 private:
  using Key = std::pair<int, std::string>;

  const std::vector<NodeId>& kids(NodeId id) const {
    static const std::vector<NodeId> none;
    auto it = children_.find(id);
    return it == children_.end() ? none : it->second;
  }

  const SyntaxNode& at(NodeId id) const { return g_.node(id); }

  NodeId unwrap(NodeId id) const {
    while (at(id).kind == "ParenthesizedExpression" && kids(id).size() == 1)
      id = kids(id)[0];
    return id;
  }

  void identifiers_in(NodeId id, std::vector<NodeId>& out) const {
    if (at(id).kind == "Identifier") out.push_back(id);
    for (NodeId c : kids(id)) identifiers_in(c, out);
  }

  void bind_pattern(NodeId pattern, Binding b, int file) {
    std::vector<NodeId> ids;
    identifiers_in(pattern, ids);
    for (NodeId i : ids) bindings_[{file, *at(i).name}].push_back(b);
  }

  void write_target(NodeId target, int file) {
    target = unwrap(target);
    const SyntaxNode& t = at(target);
    if (t.kind == "Identifier") {
      reassigned_.insert({file, *t.name});
    } else if (t.kind == "MemberExpression") {
      const NodeId obj = unwrap(kids(target).at(0));
      if (at(obj).kind == "Identifier") member_writes_.insert({file, *at(obj).name});
    } else {
      std::vector<NodeId> ids;
      identifiers_in(target, ids);
      for (NodeId i : ids) reassigned_.insert({file, *at(i).name});
    }
  }

  void collect(NodeId id) {
    const SyntaxNode& n = at(id);
    const auto& ch = kids(id);
    const int f = n.file;
    if (js::is_function_kind(n.kind)) {
      const size_t first_param = has_id(id) ? 1 : 0;
      if (first_param) {
        const Binding::Kind k = n.kind == "FunctionDeclaration"
                                    ? Binding::kFunctionDecl
                                    : Binding::kOther;
        bindings_[{f, *at(ch[0]).name}].push_back({k, id});
      }
      for (size_t i = first_param;
           i < ch.size() && i < first_param + static_cast<size_t>(n.arity); ++i)
        bind_pattern(ch[i], {Binding::kOther, id}, f);
    } else if (n.kind == "VariableDeclarator" && !ch.empty()) {
      bind_pattern(ch[0], {Binding::kVariable, id}, f);
    } else if ((n.kind == "ClassDeclaration" || n.kind == "ClassExpression") &&
               !ch.empty() && at(ch[0]).kind == "Identifier") {
      bindings_[{f, *at(ch[0]).name}].push_back({Binding::kOther, id});
    } else if (n.kind == "CatchClause" && !ch.empty() &&
               at(ch[0]).kind != "BlockStatement") {
      bind_pattern(ch[0], {Binding::kOther, id}, f);
    } else if (n.kind == "ImportSpecifier" ||
               n.kind == "ImportDefaultSpecifier" ||
               n.kind == "ImportNamespaceSpecifier") {
      bind_pattern(id, {Binding::kOther, id}, f);
    } else if ((n.kind == "AssignmentExpression" ||
                n.kind == "UpdateExpression" || n.kind == "ForInStatement" ||
                n.kind == "ForOfStatement") &&
               !ch.empty()) {
      if (at(ch[0]).kind != "VariableDeclaration") write_target(ch[0], f);
    }
    for (NodeId c : ch) collect(c);
  }

 public:
  // A named function expression or declaration keeps its name as the first
  // child; methods carry ref_name without such a child.
  bool has_id(NodeId fn) const {
    const SyntaxNode& n = at(fn);
    const auto& ch = kids(fn);
    if (!n.ref_name || n.kind == "ArrowFunctionExpression" || ch.empty())
      return false;
    const SyntaxNode& first = at(ch[0]);
    return first.kind == "Identifier" && first.name == n.ref_name &&
           ch.size() >= static_cast<size_t>(n.arity) + 2;
  }

 private:
  const Binding* unique_binding(int file, const std::string& name) const {
    if (reassigned_.count({file, name})) return nullptr;
    auto it = bindings_.find({file, name});
    if (it == bindings_.end() || it->second.size() != 1) return nullptr;
    return &it->second.front();
  }

  std::optional<NodeId> initializer(const Binding& b) const {
    if (b.kind != Binding::kVariable) return std::nullopt;
    const auto& ch = kids(b.owner);
    if (ch.size() != 2 || at(ch[0]).kind != "Identifier") return std::nullopt;
    return unwrap(ch[1]);
  }

  std::optional<NodeId> resolve(const SyntaxNode& call) const {
    const auto& ch = kids(call.id);
    if (ch.empty()) return std::nullopt;
    const NodeId callee = unwrap(ch[0]);
    const SyntaxNode& c = at(callee);
    if (c.kind == "Identifier") {
      const Binding* b = unique_binding(call.file, *c.name);
      if (!b) return std::nullopt;
      if (b->kind == Binding::kFunctionDecl) return b->owner;
      auto init = initializer(*b);
      if (init && js::is_function_kind(at(*init).kind)) return init;
      return std::nullopt;
    }
    if (c.kind != "MemberExpression" || c.computed) return std::nullopt;
    const auto& mk = kids(callee);
    if (mk.size() != 2) return std::nullopt;
    const SyntaxNode& obj = at(unwrap(mk[0]));
    const SyntaxNode& prop = at(mk[1]);
    if (obj.kind != "Identifier" || prop.kind != "Identifier")
      return std::nullopt;
    if (member_writes_.count({call.file, *obj.name})) return std::nullopt;
    const Binding* b = unique_binding(call.file, *obj.name);
    if (!b) return std::nullopt;
    auto init = initializer(*b);
    if (!init || at(*init).kind != "ObjectExpression") return std::nullopt;
    std::optional<NodeId> found;
    for (NodeId p : kids(*init)) {
      const SyntaxNode& pn = at(p);
      if (pn.kind != "Property") return std::nullopt;  // spread: unknown keys
      const auto& pk = kids(p);
      if (pk.size() != 2 || pn.computed) continue;
      const SyntaxNode& key = at(pk[0]);
      if (key.kind != "Identifier" || key.name != prop.name) continue;
      if (found) return std::nullopt;
      found = unwrap(pk[1]);
    }
    if (found && js::is_function_kind(at(*found).kind)) return found;
    return std::nullopt;
  }

  const ProgramGraph& g_;
  std::map<NodeId, std::vector<NodeId>> children_;
  std::map<Key, std::vector<Binding>> bindings_;
  std::set<Key> reassigned_;
  std::set<Key> member_writes_;
};

}  // namespace

CallEdgeSet heuristic_static_resolve(const ProgramGraph& graph) {
  return Resolver(graph).run();
}

CallEdgeSet merge_edge_sets(const ProgramGraph& graph,
                            const std::vector<CallEdgeSet>& sets) {
  CallEdgeSet out;
  for (const CallEdgeSet& s : sets) {
    for (const auto& [key, e] : s.edges) {
      if (!graph.has(e.callsite) || !graph.has(e.callee) ||
          !js::is_call_site_kind(graph.node(e.callsite).kind) ||
          !js::is_function_kind(graph.node(e.callee).kind)) {
        throw_data("edge " + std::to_string(e.callsite) + "->" +
                   std::to_string(e.callee) + " does not fit the graph");
      }
      out.add(e);
    }
  }
  return out;
}

std::vector<std::pair<NodeId, NodeId>> sample_negatives(
    const std::vector<NodeId>& call_sites,
    const std::vector<NodeId>& function_defs, const CallEdgeSet& positives,
    size_t n, Rng& rng) {
  const uint64_t total =
      static_cast<uint64_t>(call_sites.size()) * function_defs.size();
  const std::set<NodeId> cs_set(call_sites.begin(), call_sites.end());
  const std::set<NodeId> fn_set(function_defs.begin(), function_defs.end());
  uint64_t taken = 0;
  for (const auto& [key, e] : positives.edges) {
    if (cs_set.count(key.first) && fn_set.count(key.second)) ++taken;
  }
  const uint64_t free = total - taken;
  if (n > free) {
    throw_usage("cannot draw " + std::to_string(n) + " negatives, only " +
                std::to_string(free) + " non-edges exist");
  }
  std::vector<std::pair<NodeId, NodeId>> out;
  out.reserve(n);
  if (n == 0) return out;
  if (2 * n <= free) {
    std::set<std::pair<NodeId, NodeId>> seen;
    while (out.size() < n) {
      const NodeId cs = call_sites[uniform_index(rng, call_sites.size())];
      const NodeId fn = function_defs[uniform_index(rng, function_defs.size())];
      if (positives.contains(cs, fn) || !seen.insert({cs, fn}).second) continue;
      out.push_back({cs, fn});
    }
    return out;
  }
  std::vector<std::pair<NodeId, NodeId>> pool;
  pool.reserve(free);
  for (NodeId cs : call_sites) {
    for (NodeId fn : function_defs) {
      if (!positives.contains(cs, fn)) pool.push_back({cs, fn});
    }
  }
  for (size_t i = 0; i < n; ++i) {
    const size_t j = i + uniform_index(rng, pool.size() - i);
    std::swap(pool[i], pool[j]);
    out.push_back(pool[i]);
  }
  return out;
}

std::vector<std::pair<NodeId, NodeId>> sample_negatives(
    const ProgramGraph& graph, const CallEdgeSet& positives, size_t n,
    uint64_t seed) {
  const Endpoints ep = enumerate_endpoints(graph);
  Rng rng(seed);
  return sample_negatives(ep.call_sites, ep.function_defs, positives, n, rng);
}

}  // namespace cgnn
