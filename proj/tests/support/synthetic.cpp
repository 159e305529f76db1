#include "support/synthetic.hpp"

#include <map>
#include <sstream>

#include "cgnn/js/ast.hpp"
#include "cgnn/util.hpp"

namespace cgnn::testing {

namespace {

const char* kVerbs[] = {"load",  "save",  "parse", "build", "check", "merge",
                        "split", "format", "render", "scan", "apply", "reset"};
const char* kNouns[] = {"User",  "Order", "Item",   "Token",  "Node",
                        "Path",  "Cache", "Query",  "Record", "Stream",
                        "Buffer", "Config"};
const char* kParams[] = {"a", "b", "c"};

}  // namespace

std::vector<std::pair<std::string, std::string>> synthetic_sources(
    const CorpusOptions& opts) {
  Rng rng(opts.seed);
  std::vector<std::string> names;
  for (const char* v : kVerbs)
    for (const char* n : kNouns) names.push_back(std::string(v) + n);
  seeded_shuffle(names, rng);
  names.resize(opts.functions);

  std::vector<int> arity(opts.functions), file_of(opts.functions);
  for (int i = 0; i < opts.functions; ++i) {
    arity[i] = static_cast<int>(uniform_index(rng, 4));
    file_of[i] = i % opts.files;
  }

  std::vector<std::ostringstream> out(opts.files);
  for (int i = 0; i < opts.functions; ++i) {
    std::ostringstream& s = out[file_of[i]];
    s << "function " << names[i] << "(";
    for (int p = 0; p < arity[i]; ++p) s << (p ? ", " : "") << kParams[p];
    s << ") {\n  var acc = " << (arity[i] ? "a" : "0") << ";\n";
    const int calls = opts.min_calls +
                      static_cast<int>(uniform_index(rng, opts.max_calls - opts.min_calls + 1));
    for (int k = 0; k < calls; ++k) {
      const bool cross = opts.files > 1 && uniform_unit(rng) < opts.cross_file;
      int t;
      do {
        t = static_cast<int>(uniform_index(rng, opts.functions));
      } while (t == i || (file_of[t] != file_of[i]) != cross);
      std::string args;
      for (int p = 0; p < arity[t]; ++p) {
        if (p) args += ", ";
        args += p == 0 ? "acc" : (p <= arity[i] ? kParams[p - 1] : std::to_string(p));
      }
      switch (uniform_index(rng, 3)) {
        case 0:
          s << "  acc = " << names[t] << "(" << args << ");\n";
          break;
        case 1:
          s << "  if (acc > " << k << ") { " << names[t] << "(" << args << "); }\n";
          break;
        default:
          s << "  var r" << k << " = " << names[t] << "(" << args << ") + " << k << ";\n";
          break;
      }
    }
    s << "  return acc;\n}\n\n";
  }

  std::vector<std::pair<std::string, std::string>> files;
  for (int f = 0; f < opts.files; ++f)
    files.push_back({"src/mod" + std::to_string(f) + ".js", out[f].str()});
  return files;
}

ProgramGraph synthetic_graph(const CorpusOptions& opts) {
  ParseResult r = parse_sources(synthetic_sources(opts), opts.seed);
  const std::set<std::string> kinds(default_prune_kinds().begin(),
                                    default_prune_kinds().end());
  return link_identifiers(prune(r.graph, kinds));
}

CallEdgeSet name_match_edges(const ProgramGraph& graph) {
  std::map<std::string, std::vector<NodeId>> defs;
  for (const SyntaxNode& n : graph.nodes) {
    if (!n.semantic && js::is_function_kind(n.kind) && n.ref_name)
      defs[*n.ref_name].push_back(n.id);
  }
  CallEdgeSet out;
  for (const SyntaxNode& n : graph.nodes) {
    if (n.semantic || !js::is_call_site_kind(n.kind) || !n.ref_name) continue;
    const auto it = defs.find(*n.ref_name);
    if (it == defs.end() || it->second.size() != 1) continue;
    out.add({n.id, it->second[0], kStatic, 0});
  }
  return out;
}

}  // namespace cgnn::testing
