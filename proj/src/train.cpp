#include "cgnn/train.hpp"

#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>

#include "cgnn/error.hpp"
#include "cgnn/evaluation.hpp"
#include "cgnn/util.hpp"
#include "json.hpp"

namespace cgnn {

using ojson = nlohmann::ordered_json;

namespace {

constexpr size_t kMinPositives = 20;
constexpr char kMagic[8] = {'C', 'G', 'N', 'N', 'C', 'K', 'P', 'T'};
constexpr uint32_t kBlobVersion = 1;

struct Adam {
  std::vector<double> m, v;
  int64_t t = 0;
  double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  explicit Adam(size_t n) : m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& x, const std::vector<double>& g, double lr) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (size_t i = 0; i < x.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      x[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
    }
  }
};

struct ValStats {
  double hit5 = 0.0, mrr = 0.0, loss = 0.0;
};

double bce(double logit, double y) {
  const double sp = logit > 0 ? logit + std::log1p(std::exp(-logit))
                              : std::log1p(std::exp(logit));
  return sp - y * logit;
}

ValStats validate(const MessageGraph& mg, const ModelParams& params,
                  const std::vector<std::pair<int32_t, int32_t>>& val_pos,
                  const std::vector<std::pair<int32_t, int32_t>>& val_neg,
                  const std::vector<int32_t>& def_rows) {
  ValStats s;
  if (val_pos.empty()) return s;
  const Mat h = forward(mg, encode_nodes(mg, params), params);
  const PairScorer head = make_pair_scorer(h, params);
  std::vector<double> scores(def_rows.size());
  for (const auto& [cs, fn] : val_pos) {
    size_t true_index = def_rows.size();
    for (size_t d = 0; d < def_rows.size(); ++d) {
      scores[d] = head.logit(cs, def_rows[d]);
      if (def_rows[d] == fn) true_index = d;
    }
    const size_t r = pessimistic_rank(scores, true_index);
    if (r < 5) s.hit5 += 1.0;
    s.mrr += 1.0 / (1.0 + static_cast<double>(r));
    s.loss += bce(head.logit(cs, fn), 1.0);
  }
  for (const auto& [cs, fn] : val_neg) s.loss += bce(head.logit(cs, fn), 0.0);
  s.hit5 /= static_cast<double>(val_pos.size());
  s.mrr /= static_cast<double>(val_pos.size());
  s.loss /= static_cast<double>(val_pos.size() + val_neg.size());
  return s;
}

bool better(double hit5, double mrr, double best_hit5, double best_mrr) {
  constexpr double kTol = 1e-12;
  if (hit5 > best_hit5 + kTol) return true;
  return hit5 > best_hit5 - kTol && mrr > best_mrr + kTol;
}

}  // namespace

std::string train_report_to_json(const TrainReport& r) {
  ojson j;
  j["stop_reason"] = r.stop_reason;
  j["epochs_run"] = r.epochs.size();
  j["best_epoch"] = r.best_epoch;
  j["best_val_hit5"] = r.best_val_hit5;
  j["best_val_mrr"] = r.best_val_mrr;
  j["wall_seconds"] = r.wall_seconds;
  j["oov_kinds"] = r.oov_kinds;
  j["message_edges"] = r.message_edges;
  j["call_msg_edges"] = r.call_msg_edges;
  ojson epochs = ojson::array();
  for (const EpochLog& e : r.epochs) {
    epochs.push_back({{"epoch", e.epoch},
                      {"loss", e.loss},
                      {"val_loss", e.val_loss},
                      {"val_hit5", e.val_hit5},
                      {"val_mrr", e.val_mrr},
                      {"lr", e.lr}});
  }
  j["epochs"] = epochs;
  return j.dump();
}

TrainResult train(const ProgramGraph& graph, const FeatureTable& features,
                  const CallEdgeSet& positives, const Hyperparams& hp,
                  const EpochCallback& on_epoch) {
  hp.validate();
  if (positives.size() < kMinPositives) {
    throw_data("too few labels: " + std::to_string(positives.size()) +
               " positive edges, at least " + std::to_string(kMinPositives) +
               " required");
  }
  Splits splits = split_edges(positives, hp.split_train, hp.split_val,
                              hp.split_test, hp.seed);
  return train_on_splits(graph, features, std::move(splits), hp, on_epoch);
}

TrainResult train_on_splits(const ProgramGraph& graph,
                            const FeatureTable& features, Splits splits,
                            const Hyperparams& hp,
                            const EpochCallback& on_epoch) {
  hp.validate();
  const auto t0 = std::chrono::steady_clock::now();
  for (const auto& [key, e] : splits.val.edges) {
    if (splits.train.contains(key.first, key.second))
      throw_data("validation edge also present in the training split");
  }
  for (const auto& [key, e] : splits.test.edges) {
    if (splits.train.contains(key.first, key.second))
      throw_data("test edge also present in the training split");
  }
  if (splits.train.empty()) throw_data("training split is empty");

  TrainResult result;
  result.splits = splits;
  ModelParams params = init_model(hp);
  const MessageGraph mg =
      build_message_graph(graph, features, &splits.train, params);
  result.report.oov_kinds = mg.oov_kinds;
  result.report.message_edges = mg.num_edges();
  result.report.call_msg_edges = static_cast<size_t>(std::count(
      mg.type.begin(), mg.type.end(), static_cast<uint8_t>(EdgeType::kCallMsg)));

  const Endpoints ep = enumerate_endpoints(graph);
  std::vector<int32_t> def_rows;
  for (NodeId d : ep.function_defs) def_rows.push_back(mg.row(d));

  CallEdgeSet all = merge_edge_sets(graph, {splits.train, splits.val, splits.test});
  std::vector<std::pair<int32_t, int32_t>> val_pos, val_neg;
  for (const auto& [key, e] : splits.val.edges)
    val_pos.push_back({mg.row(key.first), mg.row(key.second)});
  {
    Rng val_rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
    const size_t n = std::min<size_t>(
        val_pos.size(), ep.call_sites.size() * ep.function_defs.size() - all.size());
    for (const auto& [cs, fn] :
         sample_negatives(ep.call_sites, ep.function_defs, all, n, val_rng))
      val_neg.push_back({mg.row(cs), mg.row(fn)});
  }

  // Known positives per call site, for per-call-site negative draws.
  std::map<NodeId, size_t> positives_at;
  for (const auto& [key, e] : all.edges) positives_at[key.first]++;

  std::vector<CallEdge> train_list = splits.train.list();
  Rng rng(hp.seed + 1);
  Adam adam(params.data.size());
  double lr = hp.lr_init;
  std::vector<double> grad;

  ValStats init_stats = validate(mg, params, val_pos, val_neg, def_rows);
  std::vector<double> best = params.data;
  double best_hit5 = init_stats.hit5, best_mrr = init_stats.mrr;
  double plateau_hit5 = best_hit5, plateau_mrr = best_mrr;
  int bad_epochs = 0;
  result.report.best_epoch = 0;
  result.report.stop_reason = "epoch_cap";

  const size_t half = std::max<size_t>(1, hp.batch_size / 2);
  for (int epoch = 1; epoch <= hp.max_epochs; ++epoch) {
    seeded_shuffle(train_list, rng);
    double loss_sum = 0.0;
    size_t loss_count = 0;
    for (size_t begin = 0; begin < train_list.size(); begin += half) {
      const size_t end = std::min(train_list.size(), begin + half);
      PairRows pairs;
      std::vector<double> labels;
      for (size_t i = begin; i < end; ++i) {
        pairs.push_back({mg.row(train_list[i].callsite), mg.row(train_list[i].callee)});
        labels.push_back(1.0);
      }
      const size_t want = end - begin;
      if (hp.negatives == "per_callsite") {
        for (size_t i = begin; i < end; ++i) {
          const NodeId cs = train_list[i].callsite;
          if (positives_at[cs] >= ep.function_defs.size()) continue;
          NodeId fn;
          do {
            fn = ep.function_defs[uniform_index(rng, ep.function_defs.size())];
          } while (all.contains(cs, fn));
          pairs.push_back({mg.row(cs), mg.row(fn)});
          labels.push_back(0.0);
        }
      } else {
        const size_t free =
            ep.call_sites.size() * ep.function_defs.size() - all.size();
        for (const auto& [cs, fn] : sample_negatives(
                 ep.call_sites, ep.function_defs, all, std::min(want, free), rng)) {
          pairs.push_back({mg.row(cs), mg.row(fn)});
          labels.push_back(0.0);
        }
      }
      const double loss = loss_and_gradient(mg, params, pairs, labels, &grad);
      if (!std::isfinite(loss)) {
        throw_data("non-finite training loss at epoch " + std::to_string(epoch));
      }
      for (double g : grad) {
        if (!std::isfinite(g))
          throw_data("non-finite gradient at epoch " + std::to_string(epoch));
      }
      adam.step(params.data, grad, lr);
      loss_sum += loss * static_cast<double>(pairs.size());
      loss_count += pairs.size();
    }

    const ValStats vs = validate(mg, params, val_pos, val_neg, def_rows);
    EpochLog log{epoch, loss_sum / static_cast<double>(loss_count), vs.loss,
                 vs.hit5, vs.mrr, lr};
    result.report.epochs.push_back(log);
    if (on_epoch) on_epoch(log);

    if (better(vs.hit5, vs.mrr, best_hit5, best_mrr)) {
      best = params.data;
      best_hit5 = vs.hit5;
      best_mrr = vs.mrr;
      result.report.best_epoch = epoch;
    }
    if (better(vs.hit5, vs.mrr, plateau_hit5, plateau_mrr)) {
      plateau_hit5 = vs.hit5;
      plateau_mrr = vs.mrr;
      bad_epochs = 0;
    } else if (++bad_epochs > hp.patience) {
      lr *= hp.plateau_factor;
      bad_epochs = 0;
      if (lr < hp.lr_floor) {
        result.report.stop_reason = "lr_floor";
        break;
      }
    }
  }

  params.data = std::move(best);
  result.params = std::move(params);
  result.report.best_val_hit5 = best_hit5;
  result.report.best_val_mrr = best_mrr;
  result.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

// ---------------------------------------------------------------------------
// Checkpoints

void save_checkpoint(const std::string& path, const ModelParams& params,
                     const std::string& metrics_json,
                     const std::string& extra_json) {
  std::string blob(kMagic, sizeof(kMagic));
  auto put = [&](const void* p, size_t n) {
    blob.append(static_cast<const char*>(p), n);
  };
  const uint32_t version = kBlobVersion;
  const uint64_t count = params.data.size();
  put(&version, sizeof(version));
  put(&count, sizeof(count));
  put(params.data.data(), params.data.size() * sizeof(double));
  write_file(path, blob);

  ojson side;
  side["tool_version"] = kToolVersion;
  side["seed"] = params.hp.seed;
  side["hyperparams"] = ojson::parse(hyperparams_to_json(params.hp));
  side["kind_vocab"] = params.kind_vocab;
  ojson tensors = ojson::array();
  for (const TensorSpec& s : params.specs)
    tensors.push_back({{"name", s.name}, {"rows", s.rows}, {"cols", s.cols}});
  side["tensors"] = tensors;
  side["metrics"] = ojson::parse(metrics_json);
  side["blob_digest"] = hex_digest(blob);
  const ojson extra = ojson::parse(extra_json);
  for (const auto& [k, v] : extra.items()) side[k] = v;
  write_file(path + ".json", side.dump(2) + "\n");
}

ModelParams load_checkpoint(const std::string& path, std::string* sidecar_json) {
  const std::string side_text = read_file(path + ".json");
  nlohmann::json side;
  try {
    side = nlohmann::json::parse(side_text);
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("checkpoint sidecar is not valid JSON: ") + e.what());
  }
  ModelParams params;
  try {
    const Hyperparams hp = hyperparams_from_json(side.at("hyperparams").dump());
    params = ModelParams(hp, side.at("kind_vocab").get<std::vector<std::string>>());
    const auto& tensors = side.at("tensors");
    if (tensors.size() != params.specs.size())
      throw_data("checkpoint tensor list does not match its hyperparameters");
    for (size_t i = 0; i < params.specs.size(); ++i) {
      const TensorSpec& s = params.specs[i];
      if (tensors[i].at("name").get<std::string>() != s.name ||
          tensors[i].at("rows").get<int>() != s.rows ||
          tensors[i].at("cols").get<int>() != s.cols)
        throw_data("checkpoint tensor " + s.name + " has an unexpected shape");
    }
  } catch (const nlohmann::json::exception& e) {
    throw_data(std::string("malformed checkpoint sidecar: ") + e.what());
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kUsage) throw_data(e.what());
    throw;
  }
  const std::string blob = read_file(path);
  const size_t header = sizeof(kMagic) + sizeof(uint32_t) + sizeof(uint64_t);
  if (blob.size() < header || std::memcmp(blob.data(), kMagic, sizeof(kMagic)) != 0)
    throw_data(path + " is not a checkpoint blob");
  uint32_t version;
  uint64_t count;
  std::memcpy(&version, blob.data() + sizeof(kMagic), sizeof(version));
  std::memcpy(&count, blob.data() + sizeof(kMagic) + sizeof(version), sizeof(count));
  if (version != kBlobVersion) throw_data("unsupported checkpoint version");
  if (count != params.data.size() || blob.size() != header + count * sizeof(double))
    throw_data("checkpoint blob size does not match the tensor shapes");
  std::memcpy(params.data.data(), blob.data() + header, count * sizeof(double));
  for (double x : params.data) {
    if (!std::isfinite(x)) throw_data("checkpoint holds non-finite values");
  }
  if (sidecar_json) *sidecar_json = side_text;
  return params;
}

}  // namespace cgnn
