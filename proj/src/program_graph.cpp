#include "cgnn/program_graph.hpp"

#include <algorithm>
#include <filesystem>

#include "cgnn/error.hpp"
#include "cgnn/js/ast.hpp"
#include "cgnn/js/parser.hpp"
#include "cgnn/util.hpp"

namespace cgnn {

namespace fs = std::filesystem;

namespace {

void append_tree(ProgramGraph& g, const js::AstNode& ast, int file,
                 NodeId parent, NodeId& next_id) {
  SyntaxNode n;
  n.id = next_id++;
  n.kind = ast.kind;
  n.name = ast.name;
  n.ref_name = ast.ref_name;
  n.file = file;
  n.start = ast.start;
  n.end = ast.end;
  n.arity = ast.arity;
  n.computed = ast.computed;
  const NodeId id = n.id;
  g.nodes.push_back(std::move(n));
  g.edges.push_back({parent, id, EdgeType::kAst});
  g.edges.push_back({id, parent, EdgeType::kAstRev});
  for (const js::AstNode& c : ast.children) append_tree(g, c, file, id, next_id);
}

ParseResult assemble(const std::vector<std::string>& paths,
                     const std::vector<std::string>& sources, uint64_t seed) {
  ParseResult r;
  ProgramGraph& g = r.graph;
  g.meta.seed = seed;
  g.meta.prune_kinds = {};
  SyntaxNode root;
  root.id = 0;
  root.kind = "Project";
  g.nodes.push_back(root);
  g.root = 0;
  NodeId next_id = 1;
  for (size_t i = 0; i < paths.size(); ++i) {
    g.meta.input_digests[paths[i]] = hex_digest(sources[i]);
    js::AstNode ast;
    js::ParseError err;
    if (!js::try_parse_program(sources[i], &ast, &err)) {
      r.diagnostics.push_back({paths[i], err.message});
      continue;
    }
    const int file = static_cast<int>(g.files.size());
    g.files.push_back(paths[i]);
    append_tree(g, ast, file, g.root, next_id);
  }
  g.reindex();
  sort_edges(g);
  return r;
}

}  // namespace

void sort_edges(ProgramGraph& graph) {
  std::sort(graph.edges.begin(), graph.edges.end(),
            [](const Edge& a, const Edge& b) {
              if (a.type != b.type) return a.type < b.type;
              if (a.src != b.src) return a.src < b.src;
              return a.dst < b.dst;
            });
}

ParseResult parse_sources(std::vector<std::pair<std::string, std::string>> files,
                          uint64_t seed) {
  std::sort(files.begin(), files.end());
  std::vector<std::string> paths, sources;
  for (auto& [p, s] : files) {
    paths.push_back(p);
    sources.push_back(std::move(s));
  }
  return assemble(paths, sources, seed);
}

ParseResult parse_project(const std::string& project_dir,
                          const ParseOptions& options) {
  if (!fs::is_directory(project_dir))
    throw_usage("project directory does not exist: " + project_dir);
  std::vector<std::string> paths = list_matching_files(
      project_dir, options.include_globs, options.exclude_globs);
  if (paths.empty())
    throw_data("no source files match the include globs under " +
               project_dir);
  std::vector<std::string> sources;
  sources.reserve(paths.size());
  for (const std::string& p : paths)
    sources.push_back(read_file(fs::path(project_dir) / p));
  ParseResult r = assemble(paths, sources, options.seed);
  r.graph.meta.project_dir = project_dir;
  return r;
}

const std::vector<std::string>& default_prune_kinds() {
  static const std::vector<std::string> kinds = {
      "BinaryExpression",  "ExpressionStatement",
      "Literal",           "LogicalExpression",
      "ParenthesizedExpression", "SequenceExpression",
      "TemplateElement",   "UnaryExpression",
  };
  return kinds;
}

bool is_protected_kind(std::string_view kind) {
  static const std::set<std::string_view> kinds = {
      "Project",          "Program",          "FunctionDeclaration",
      "FunctionExpression", "ArrowFunctionExpression", "CallExpression",
      "NewExpression",    "Identifier",       "MemberExpression",
      "ObjectExpression", "Property",         "VariableDeclarator",
      "AssignmentExpression", "ReturnStatement", "ClassDeclaration",
      "MethodDefinition", "SemanticName",
  };
  return kinds.count(kind) > 0;
}

ProgramGraph prune(const ProgramGraph& graph,
                   const std::set<std::string>& prune_kinds) {
  for (const std::string& k : prune_kinds) {
    if (is_protected_kind(k)) throw_usage("kind " + k + " cannot be pruned");
  }
  PruneState state;
  state.prune_kinds = prune_kinds;
  state.parent_child_map = graph.children_map();
  std::map<NodeId, NodeId> parent = graph.parent_map();

  // Visit in pre-order so that a removed node's children are spliced into
  // their new parent before they are themselves examined.
  std::vector<NodeId> order;
  std::vector<NodeId> stack = {graph.root};
  while (!stack.empty()) {
    const NodeId v = stack.back();
    stack.pop_back();
    order.push_back(v);
    auto it = state.parent_child_map.find(v);
    if (it == state.parent_child_map.end()) continue;
    for (auto c = it->second.rbegin(); c != it->second.rend(); ++c)
      stack.push_back(*c);
  }

  std::set<NodeId> removed;
  for (NodeId v : order) {
    if (v == graph.root || !prune_kinds.count(graph.node(v).kind)) continue;
    const NodeId p = parent.at(v);
    std::vector<NodeId> kids;
    if (auto it = state.parent_child_map.find(v);
        it != state.parent_child_map.end()) {
      kids = std::move(it->second);
      state.parent_child_map.erase(it);
    }
    std::vector<NodeId>& siblings = state.parent_child_map[p];
    auto pos = std::find(siblings.begin(), siblings.end(), v);
    pos = siblings.erase(pos);
    siblings.insert(pos, kids.begin(), kids.end());
    for (NodeId c : kids) parent[c] = p;
    parent.erase(v);
    removed.insert(v);
  }

  ProgramGraph out;
  out.root = graph.root;
  out.files = graph.files;
  out.meta = graph.meta;
  std::set<std::string> kinds(graph.meta.prune_kinds.begin(),
                              graph.meta.prune_kinds.end());
  kinds.insert(prune_kinds.begin(), prune_kinds.end());
  out.meta.prune_kinds.assign(kinds.begin(), kinds.end());
  for (const SyntaxNode& n : graph.nodes) {
    if (!removed.count(n.id)) out.nodes.push_back(n);
  }
  for (const auto& [p, kids] : state.parent_child_map) {
    for (NodeId c : kids) {
      out.edges.push_back({p, c, EdgeType::kAst});
      out.edges.push_back({c, p, EdgeType::kAstRev});
    }
  }
  for (const Edge& e : graph.edges) {
    if (e.type == EdgeType::kAst || e.type == EdgeType::kAstRev) continue;
    if (removed.count(e.src) || removed.count(e.dst)) continue;
    out.edges.push_back(e);
  }
  out.reindex();
  sort_edges(out);
  return out;
}

ProgramGraph link_identifiers(const ProgramGraph& graph) {
  ProgramGraph out;
  out.root = graph.root;
  out.files = graph.files;
  out.meta = graph.meta;
  for (const SyntaxNode& n : graph.nodes) {
    if (!n.semantic) out.nodes.push_back(n);
  }
  for (const Edge& e : graph.edges) {
    if (e.type != EdgeType::kSemantic && e.type != EdgeType::kSemanticRev)
      out.edges.push_back(e);
  }
  out.reindex();

  std::map<std::string, std::vector<NodeId>> uses;
  for (const SyntaxNode& n : out.nodes) {
    if (n.name) uses[*n.name].push_back(n.id);
  }
  NodeId next_id = out.nodes.empty() ? 0 : out.max_id() + 1;
  for (const auto& [name, ids] : uses) {
    SyntaxNode s;
    s.id = next_id++;
    s.kind = "SemanticName";
    s.name = name;
    s.semantic = true;
    for (NodeId u : ids) {
      out.edges.push_back({u, s.id, EdgeType::kSemantic});
      out.edges.push_back({s.id, u, EdgeType::kSemanticRev});
    }
    out.nodes.push_back(std::move(s));
  }
  out.reindex();
  sort_edges(out);
  return out;
}

FeatureTable compute_features(const ProgramGraph& graph) {
  FeatureTable t;
  t.reserve(graph.nodes.size());
  for (const SyntaxNode& n : graph.nodes) {
    FeatureRow r;
    r.node_type = n.kind;
    r.name = n.name ? n.name : n.ref_name;
    if (js::is_function_kind(n.kind)) r.number_of_parameter = n.arity;
    if (js::is_call_site_kind(n.kind)) r.number_of_argument = n.arity;
    t.push_back(std::move(r));
  }
  return t;
}

Endpoints enumerate_endpoints(const ProgramGraph& graph) {
  Endpoints e;
  for (const SyntaxNode& n : graph.nodes) {
    if (n.semantic) continue;
    if (js::is_call_site_kind(n.kind)) e.call_sites.push_back(n.id);
    if (js::is_function_kind(n.kind)) e.function_defs.push_back(n.id);
  }
  return e;
}

}  // namespace cgnn
