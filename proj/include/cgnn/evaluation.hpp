#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cgnn/ground_truth.hpp"
#include "cgnn/model.hpp"
#include "cgnn/train.hpp"

namespace cgnn {

inline constexpr int kMaxK = 20;

// Seeded shuffle then contiguous partition: floor(n*train) edges, then
// floor(n*val), then the rest. With n >= 10 an empty part is an error.
Splits split_edges(const CallEdgeSet& edges, double train, double val,
                   double test, uint64_t seed);

// |{c : s_c > s_t}| + |{c != t : s_c == s_t}|.
size_t pessimistic_rank(const std::vector<double>& scores, size_t true_index);
size_t optimistic_rank(const std::vector<double>& scores, size_t true_index);

struct CandidateRanking {
  NodeId callsite = 0;
  std::vector<std::pair<NodeId, double>> candidates;  // descending score
  std::optional<NodeId> true_callee;
  std::optional<size_t> rank;
  size_t n = 0;  // candidates scored (before any top-k cut)
};

// Embeds a graph once under a trained model and scores call sites against
// every function definition of the graph.
class Scorer {
 public:
  Scorer(const ModelParams& params, const ProgramGraph& graph,
         const CallEdgeSet* context_edges);

  const Endpoints& endpoints() const { return endpoints_; }
  // Probabilities aligned with endpoints().function_defs.
  std::vector<double> scores(NodeId callsite) const;
  // top_k == 0 keeps every candidate.
  CandidateRanking rank(NodeId callsite, std::optional<NodeId> true_callee,
                        size_t top_k = 0) const;

 private:
  const ProgramGraph& graph_;
  Endpoints endpoints_;
  MessageGraph mg_;
  PairScorer head_;
  std::vector<int32_t> def_rows_;
};

CandidateRanking rank_callsite(const ModelParams& params,
                               const ProgramGraph& graph,
                               const CallEdgeSet* context_edges,
                               NodeId callsite,
                               std::optional<NodeId> true_callee,
                               size_t top_k = 0);

struct EvalSummary {
  std::string project;
  size_t edges = 0;  // evaluated (call site, true callee) pairs
  std::array<double, kMaxK> hit{};  // hit[k-1] = share with rank < k
  double mrr = 0.0;
  std::vector<size_t> histogram;  // ranks 0..19, last bin 20 and above
  std::map<std::string, std::pair<size_t, size_t>> categories;  // label -> (edges, rank 0)
  double random_hit1 = 0.0;  // expected hit@1 of a uniform random scorer
  double random_hit5 = 0.0;
  double runtime_seconds = 0.0;
};

std::string summary_to_json(const EvalSummary& s);

struct Prediction {
  CandidateRanking ranking;
  std::optional<std::string> category;
};

// Ranks every test edge. Predictions (top_k candidates each) are appended
// to `predictions` when non-null.
EvalSummary evaluate(const Scorer& scorer, const ProgramGraph& graph,
                     const CallEdgeSet& test_edges, size_t top_k = kMaxK,
                     std::vector<Prediction>* predictions = nullptr);

std::string predictions_to_ndjson(const std::vector<Prediction>& preds,
                                  const std::string& meta_json);

// Weighted by per-project evaluated edge counts.
EvalSummary aggregate_weighted(const std::vector<EvalSummary>& summaries);

struct RocResult {
  std::vector<std::pair<double, double>> points;  // (fpr, tpr), from (0,0)
  double auc = 0.0;
};
RocResult balanced_roc(const std::vector<double>& positive_scores,
                       const std::vector<double>& negative_scores);

inline constexpr const char* kCategories[] = {
    "indirect_apply_call",  "higher_order",         "anonymous_callee",
    "cross_file_diff_name", "cross_file_same_name", "same_file_direct"};

class Categorizer {
 public:
  explicit Categorizer(const ProgramGraph& graph);
  std::string categorize(const CallEdge& edge) const;

 private:
  bool is_param_of_enclosing(NodeId call, const std::string& name) const;
  std::vector<NodeId> params_of(NodeId fn) const;

  const ProgramGraph& graph_;
  std::map<NodeId, std::vector<NodeId>> children_;
  std::map<NodeId, NodeId> parent_;
};

std::string categorize_edge(const ProgramGraph& graph, const CallEdge& edge);

struct TransferProject {
  std::string name;
  ProgramGraph graph;
  CallEdgeSet edges;
};

struct FoldResult {
  std::string held_out;
  EvalSummary summary;
  std::pair<NodeId, NodeId> held_out_ids;  // [first, last] in the global numbering
  size_t training_nodes = 0;
  TrainReport report;
};

// Consecutive id ranges starting at 1 (0 is the shared root).
std::vector<NodeId> layout_offsets(const std::vector<const ProgramGraph*>& graphs);

// Joins graphs as disjoint components under a new Project root with id 0.
// Project i keeps its structure with every id shifted by offsets[i]; its
// files are renamed "<names[i]>/<file>".
ProgramGraph concat_graphs(const std::vector<const ProgramGraph*>& graphs,
                           const std::vector<std::string>& names,
                           const std::vector<NodeId>& offsets);
CallEdgeSet shift_edges(const CallEdgeSet& edges, NodeId offset);

// One fold per project: train on the union of the others, evaluate on the
// held-out project's test split. Throws if the held-out id range leaks
// into the training graph.
std::vector<FoldResult> transfer_eval(const std::vector<TransferProject>& projects,
                                      const Hyperparams& hp);

}  // namespace cgnn
