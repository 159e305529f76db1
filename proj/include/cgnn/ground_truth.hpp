#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgnn/graph.hpp"
#include "cgnn/program_graph.hpp"
#include "cgnn/util.hpp"

namespace cgnn {

// Provenance is a bit set so merged edges can carry several sources.
enum Provenance : uint8_t {
  kStatic = 1,
  kDynamic = 2,
  kAnalyst = 4,
};

std::string provenance_name(uint8_t bit);
std::optional<uint8_t> parse_provenance(std::string_view s);
std::vector<std::string> provenance_names(uint8_t mask);

struct CallEdge {
  NodeId callsite = 0;
  NodeId callee = 0;
  uint8_t provenance = kStatic;
  int64_t count = 0;  // dynamic occurrences; 0 when never observed
};

// Keyed by (callsite, callee); iteration order is that key order.
struct CallEdgeSet {
  std::map<std::pair<NodeId, NodeId>, CallEdge> edges;

  size_t size() const { return edges.size(); }
  bool empty() const { return edges.empty(); }
  bool contains(NodeId cs, NodeId fn) const {
    return edges.count({cs, fn}) > 0;
  }
  // Inserts or merges (provenance union, counts summed).
  void add(const CallEdge& e);
  std::vector<CallEdge> list() const;
};

struct Span {
  std::string file;
  uint32_t start = 0;
  uint32_t end = 0;
};

// One line of an edge file, before node-id resolution.
struct PositionEdge {
  Span caller;
  Span callee;
  uint8_t provenance = kStatic;
  int64_t count = 0;
};

struct EdgeFile {
  std::vector<PositionEdge> records;
  std::vector<Diagnostic> diagnostics;  // malformed lines
};

EdgeFile parse_edge_file(std::string_view text);
EdgeFile read_edge_file(const std::string& path);

// Serializes with a leading {"meta":...} line. `meta` is a JSON object text.
std::string edges_to_ndjson(const ProgramGraph& graph, const CallEdgeSet& set,
                            const std::string& meta_json);

// Smallest-enclosing-span lookup over call sites or function definitions.
class SpanIndex {
 public:
  enum class Role { kCallSite, kFunctionDef };
  SpanIndex(const ProgramGraph& graph, Role role);
  // Innermost node of the role whose span contains [start, end).
  std::optional<NodeId> enclosing(const std::string& file, uint32_t start,
                                  uint32_t end) const;

 private:
  struct Entry {
    uint32_t start, end;
    NodeId id;
  };
  std::map<std::string, std::vector<Entry>> by_file_;
};

struct IngestResult {
  CallEdgeSet edges;
  std::vector<Diagnostic> diagnostics;
  size_t records = 0;
  size_t unresolved = 0;
};

// Resolves position records to node ids. More than half unresolvable is a
// data error (the export was most likely produced from other sources).
IngestResult ingest_static_edges(const EdgeFile& file,
                                 const ProgramGraph& graph);

// Conservative same-file resolver: direct calls of a uniquely declared
// function, calls through a variable bound once to a function value, and
// o.m() on an object literal bound once with a single function-valued m.
CallEdgeSet heuristic_static_resolve(const ProgramGraph& graph);

// Union keyed by (callsite, callee). Throws when an endpoint is not a call
// site / function definition of the graph.
CallEdgeSet merge_edge_sets(const ProgramGraph& graph,
                            const std::vector<CallEdgeSet>& sets);

// n distinct uniform (callsite, callee) pairs absent from positives.
std::vector<std::pair<NodeId, NodeId>> sample_negatives(
    const ProgramGraph& graph, const CallEdgeSet& positives, size_t n,
    uint64_t seed);

// Same, drawing from explicit endpoint lists with a caller-owned generator.
std::vector<std::pair<NodeId, NodeId>> sample_negatives(
    const std::vector<NodeId>& call_sites,
    const std::vector<NodeId>& function_defs, const CallEdgeSet& positives,
    size_t n, Rng& rng);

}  // namespace cgnn
