#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cgnn/ground_truth.hpp"
#include "cgnn/model.hpp"

namespace cgnn {

struct Splits {
  CallEdgeSet train, val, test;
};

struct EpochLog {
  int epoch = 0;
  double loss = 0.0;      // mean training BCE over the epoch's batches
  double val_loss = 0.0;  // BCE on val positives plus fixed negatives
  double val_hit5 = 0.0;
  double val_mrr = 0.0;
  double lr = 0.0;
};

struct TrainReport {
  std::vector<EpochLog> epochs;
  std::string stop_reason;  // "epoch_cap" or "lr_floor"
  double wall_seconds = 0.0;
  int best_epoch = 0;       // 0 means the initial parameters were kept
  double best_val_hit5 = 0.0;
  double best_val_mrr = 0.0;
  size_t oov_kinds = 0;
  size_t message_edges = 0;
  size_t call_msg_edges = 0;
};

std::string train_report_to_json(const TrainReport& r);

struct TrainResult {
  ModelParams params;
  TrainReport report;
  Splits splits;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// Splits positives 80/10/10 by seeded shuffle, then trains. Requires at
// least 20 positives.
TrainResult train(const ProgramGraph& graph, const FeatureTable& features,
                  const CallEdgeSet& positives, const Hyperparams& hp,
                  const EpochCallback& on_epoch = {});

// Trains on a given split. Training edges form the call_msg context; the
// parameters with the best validation hit@5 (MRR breaks ties) are returned.
TrainResult train_on_splits(const ProgramGraph& graph,
                            const FeatureTable& features, Splits splits,
                            const Hyperparams& hp,
                            const EpochCallback& on_epoch = {});

// Checkpoint: raw little-endian float64 blob at `path`, JSON sidecar at
// `path + ".json"` holding hyperparams, seed, kind_vocab, tensor shapes,
// metrics and tool_version plus whatever `extra` (a JSON object) adds.
void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& metrics_json,
                     const std::string& extra_json = "{}");
// Validates blob size and tensor shapes against the sidecar.
ModelParams load_checkpoint(const std::string& path,
                            std::string* sidecar_json = nullptr);

}  // namespace cgnn
