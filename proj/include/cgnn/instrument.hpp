#pragma once

#include <map>
#include <string>
#include <vector>

#include "cgnn/ground_truth.hpp"
#include "cgnn/program_graph.hpp"

namespace cgnn {

// "file:start:end" -> node id, for every call site and function definition.
using SiteMap = std::map<std::string, NodeId>;

std::string site_key(const std::string& file, uint32_t start, uint32_t end);

struct InstrumentResult {
  SiteMap site_map;
  std::vector<Diagnostic> diagnostics;
  size_t files_instrumented = 0;
  size_t functions_instrumented = 0;
};

inline constexpr const char* kShimFile = "__cg_shim.cjs";
inline constexpr const char* kSiteMapFile = "__cg_sitemap.json";

// Copies project_dir to out_dir, splicing an entry hook into every function
// body of the matching sources and adding the logger shim. Hooks never add
// line breaks, so line numbers of the copy equal those of the original.
// The site map is written to out_dir/__cg_sitemap.json and returned.
InstrumentResult instrument_project(const std::string& project_dir,
                                    const std::string& out_dir,
                                    const ParseOptions& options = {});

// Instruments one source text. `module` selects import-based shim loading;
// `shim_spec` is the relative specifier of the shim from this file. Returns
// the new text and fills `shifts` with (line, column, length) triples for
// every insertion, in instrumented coordinates (1-based, UTF-16 columns).
struct Insertion {
  uint32_t line = 0;
  uint32_t column = 0;
  uint32_t length = 0;
};
std::string instrument_source(const std::string& file, const std::string& source,
                              bool module, const std::string& shim_spec,
                              std::vector<Insertion>* shifts,
                              size_t* functions = nullptr);

std::string site_map_to_json(const SiteMap& map, const std::string& meta_json);
SiteMap site_map_from_json(std::string_view text);

struct TraceEvent {
  std::string callee_file;
  uint32_t callee_start = 0;
  std::optional<std::string> caller_file;  // null for native frames
  uint32_t caller_line = 0;                // 1-based
  uint32_t caller_col = 0;                 // 1-based, UTF-16 units
};

struct TraceParseResult {
  CallEdgeSet edges;
  std::vector<Diagnostic> diagnostics;
  size_t events = 0;
  size_t native_dropped = 0;
  size_t external_dropped = 0;
  size_t unmapped = 0;
};

// Maps trace events onto graph edges. Callers are located by reading the
// original sources under source_root.
TraceParseResult parse_traces(std::string_view trace_text, const SiteMap& site_map,
                              const ProgramGraph& graph,
                              const std::string& source_root);

// Byte offset of a 1-based (line, UTF-16 column) position, or nullopt when
// the position lies outside the text.
std::optional<uint32_t> offset_of(std::string_view text, uint32_t line,
                                  uint32_t column);

}  // namespace cgnn
