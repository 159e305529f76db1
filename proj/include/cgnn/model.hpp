#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "cgnn/ground_truth.hpp"
#include "cgnn/program_graph.hpp"

namespace cgnn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<Mat>;
using ConstMatMap = Eigen::Map<const Mat>;

inline constexpr int kCountBuckets = 17;  // counts 0..15 and "16 or more"
inline constexpr double kGateEps = 1e-6;
inline constexpr double kNormEps = 1e-5;

struct Hyperparams {
  int layers = 5;
  int hidden = 64;
  int name_buckets = 1024;
  int max_epochs = 500;
  size_t batch_size = 32768;
  double lr_init = 1e-3;
  double lr_floor = 1e-5;
  double plateau_factor = 0.5;
  int patience = 10;
  double split_train = 0.8;
  double split_val = 0.1;
  double split_test = 0.1;
  uint64_t seed = 0;
  // Message-graph and feature switches used by the ablation harness.
  bool semantic_edges = true;
  bool node_features = true;
  bool call_msg_edges = true;
  // "uniform": negatives drawn over all (call site, definition) pairs.
  // "per_callsite": each positive's call site paired with a random callee.
  std::string negatives = "uniform";

  void validate() const;
};

std::string hyperparams_to_json(const Hyperparams& hp);
// Missing keys keep their defaults; unknown keys are a usage error.
Hyperparams hyperparams_from_json(std::string_view text);

struct TensorSpec {
  std::string name;
  int rows = 0;
  int cols = 0;
  size_t offset = 0;
  size_t size() const { return static_cast<size_t>(rows) * cols; }
};

// Every learnable tensor lives in one flat vector so the optimizer and the
// gradient checker can treat the model as a single point in R^n.
class ModelParams {
 public:
  Hyperparams hp;
  std::vector<std::string> kind_vocab;  // row kind_vocab.size() is the OOV slot
  std::vector<TensorSpec> specs;
  std::vector<double> data;

  ModelParams() = default;
  ModelParams(const Hyperparams& hp, std::vector<std::string> kind_vocab);

  size_t tensor_index(std::string_view name) const;
  MatMap tensor(std::string_view name);
  ConstMatMap tensor(std::string_view name) const;
  MatMap tensor(size_t i);
  ConstMatMap tensor(size_t i) const;
};

std::vector<std::string> default_kind_vocab();

// Uniform in [-1/sqrt(H), 1/sqrt(H)] for every tensor, seeded by hp.seed.
ModelParams init_model(const Hyperparams& hp,
                       std::vector<std::string> kind_vocab = default_kind_vocab());

int count_bucket(int count);
int name_bucket(const std::optional<std::string>& name, int buckets);

// Dense, index-based view of a program graph prepared for message passing.
// Edge k carries a message from src[k] to dst[k]; node i aggregates over the
// edges with dst == i.
struct MessageGraph {
  std::vector<NodeId> ids;  // row -> node id
  std::vector<int32_t> row_of;  // node id -> row, -1 if absent
  std::vector<int32_t> src, dst;
  std::vector<uint8_t> type;
  std::vector<int32_t> kind, name, par, arg;  // embedding rows per node
  size_t oov_kinds = 0;

  size_t num_nodes() const { return ids.size(); }
  size_t num_edges() const { return src.size(); }
  int32_t row(NodeId id) const;
};

// Builds the message-passing view. call_edges (may be null) are added as
// call_msg messages in both directions when hp.call_msg_edges is set.
MessageGraph build_message_graph(const ProgramGraph& graph,
                                 const FeatureTable& features,
                                 const CallEdgeSet* call_edges,
                                 const ModelParams& params);

Mat encode_nodes(const MessageGraph& mg, const ModelParams& params);

struct LayerCache {
  Mat h_in, e_in;
  Mat xhat_e;
  Eigen::VectorXd inv_std_e;
  Mat gate;  // sigma(e_hat)
  Mat den;
  Mat v;     // h W2^T
  Mat xhat_h;
  Eigen::VectorXd inv_std_h;
};

struct ForwardCache {
  std::vector<LayerCache> layers;
};

// Runs the L gated layers. Returns final node states; fills cache if given.
Mat forward(const MessageGraph& mg, const Mat& h0, const ModelParams& params,
            ForwardCache* cache = nullptr);

// Pair rows are (call-site row, callee row) in the message graph.
using PairRows = std::vector<std::pair<int32_t, int32_t>>;

// Scoring head with the two halves of W_head applied to every node once, so
// a pair costs O(H): logit = w2 . relu(hc[cs] + hf[fn] + b1) + b2.
struct PairScorer {
  Mat hc, hf;
  Eigen::RowVectorXd b1, w2;
  double b2 = 0.0;

  double logit(int32_t cs, int32_t fn) const;
};
PairScorer make_pair_scorer(const Mat& h, const ModelParams& params);

Eigen::VectorXd score_logits(const Mat& h, const PairRows& pairs,
                             const ModelParams& params);
// Probabilities from logits clamped to [-35, 35], so strictly inside (0, 1).
Eigen::VectorXd logits_to_probs(const Eigen::VectorXd& logits);
Eigen::VectorXd score_pairs(const Mat& h, const PairRows& pairs,
                            const ModelParams& params);

// Mean binary cross-entropy over the pairs and its exact gradient with
// respect to every parameter (same layout as params.data).
double loss_and_gradient(const MessageGraph& mg, const ModelParams& params,
                         const PairRows& pairs, const std::vector<double>& labels,
                         std::vector<double>* grad);

}  // namespace cgnn
