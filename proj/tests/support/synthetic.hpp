#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgnn/ground_truth.hpp"
#include "cgnn/program_graph.hpp"

namespace cgnn::testing {

struct CorpusOptions {
  int functions = 60;
  int files = 6;
  int min_calls = 3;
  int max_calls = 6;
  // Share of calls that target a function declared in another file.
  double cross_file = 0.2;
  uint64_t seed = 7;
};

// Generated sources: every call names a function declared exactly once in
// the project, so the true callee of each call is the same-named definition.
std::vector<std::pair<std::string, std::string>> synthetic_sources(
    const CorpusOptions& opts);

// Pruned, semantically linked graph of the corpus.
ProgramGraph synthetic_graph(const CorpusOptions& opts);

// Oracle: call sites whose called name matches exactly one definition's
// declared name, paired with that definition.
CallEdgeSet name_match_edges(const ProgramGraph& graph);

}  // namespace cgnn::testing
