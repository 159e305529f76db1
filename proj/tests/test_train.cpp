#include <cmath>

#include "cgnn/error.hpp"
#include "cgnn/evaluation.hpp"
#include "cgnn/train.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cgnn;
using namespace cgnn::testing;
namespace fs = std::filesystem;

namespace {

struct Small {
  ProgramGraph graph;
  FeatureTable features;
  CallEdgeSet positives;
};

const Small& small() {
  static const Small s = [] {
    CorpusOptions o;
    o.functions = 30;
    o.files = 3;
    Small r;
    r.graph = synthetic_graph(o);
    r.features = compute_features(r.graph);
    r.positives = name_match_edges(r.graph);
    return r;
  }();
  return s;
}

Hyperparams quick_hp(int epochs = 3) {
  Hyperparams hp;
  hp.hidden = 16;
  hp.layers = 2;
  hp.name_buckets = 64;
  hp.max_epochs = epochs;
  hp.lr_init = 0.01;
  hp.seed = 5;
  return hp;
}

}  // namespace

TEST_CASE("fewer than twenty positives is a data error") {
  const Small& s = small();
  CallEdgeSet few;
  for (const CallEdge& e : s.positives.list()) {
    if (few.size() == 19) break;
    few.add(e);
  }
  try {
    train(s.graph, s.features, few, quick_hp());
    FAIL("expected a data error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kData);
  }
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Small& s = small();
  std::vector<double> seen;
  const TrainResult a =
      train(s.graph, s.features, s.positives, quick_hp(), [&](const EpochLog& l) { seen.push_back(l.loss); });
  const TrainResult b = train(s.graph, s.features, s.positives, quick_hp());
  CHECK(a.params.data == b.params.data);
  REQUIRE(a.report.epochs.size() == 3);
  CHECK(seen.size() == 3);
  for (size_t i = 0; i < 3; ++i) {
    CHECK(a.report.epochs[i].loss == b.report.epochs[i].loss);
    CHECK(a.report.epochs[i].loss == seen[i]);
    CHECK(std::isfinite(a.report.epochs[i].val_loss));
  }
  CHECK(a.report.stop_reason == "epoch_cap");
  CHECK(a.report.best_epoch >= 0);
  CHECK(a.report.best_epoch <= 3);
}

TEST_CASE("splits do not leak and only training edges become messages") {
  const Small& s = small();
  const TrainResult r = train(s.graph, s.features, s.positives, quick_hp(1));
  const Splits& sp = r.splits;
  CHECK(sp.train.size() + sp.val.size() + sp.test.size() == s.positives.size());
  for (const auto& [key, e] : sp.test.edges) {
    CHECK_FALSE(sp.train.contains(key.first, key.second));
    CHECK_FALSE(sp.val.contains(key.first, key.second));
  }
  for (const auto& [key, e] : sp.val.edges) CHECK_FALSE(sp.train.contains(key.first, key.second));
  CHECK(r.report.call_msg_edges == 2 * sp.train.size());
  CHECK(r.report.message_edges == s.graph.edges.size() + 2 * sp.train.size());
}

TEST_CASE("overlapping splits are rejected") {
  const Small& s = small();
  Splits sp = split_edges(s.positives, 0.8, 0.1, 0.1, 1);
  sp.test.add(sp.train.list().front());
  CHECK_THROWS_AS(train_on_splits(s.graph, s.features, sp, quick_hp(1)), Error);
}

TEST_CASE("a learning rate below the floor stops training early") {
  const Small& s = small();
  Hyperparams hp = quick_hp(50);
  hp.lr_init = 1.5e-5;
  hp.lr_floor = 1e-5;
  hp.patience = 0;
  const TrainResult r = train(s.graph, s.features, s.positives, hp);
  CHECK(r.report.stop_reason == "lr_floor");
  CHECK(r.report.epochs.size() < 50);
}

TEST_CASE("training lowers the loss") {
  const Small& s = small();
  const TrainResult r = train(s.graph, s.features, s.positives, quick_hp(15));
  CHECK(r.report.epochs.back().loss < r.report.epochs.front().loss);
}

TEST_CASE("checkpoints round trip and reject mismatched shapes") {
  const fs::path dir = fresh_temp_dir("ckpt");
  Hyperparams hp = quick_hp();
  hp.seed = 77;
  const ModelParams p = init_model(hp);
  const std::string path = (dir / "m.bin").string();
  save_checkpoint(path, p, "{\"hit1\":0.5}", "{\"graph_digest\":\"x\"}");
  std::string side;
  const ModelParams q = load_checkpoint(path, &side);
  CHECK(q.data == p.data);
  CHECK(hyperparams_to_json(q.hp) == hyperparams_to_json(p.hp));
  CHECK(q.kind_vocab == p.kind_vocab);
  const auto j = nlohmann::json::parse(side);
  CHECK(j["graph_digest"] == "x");
  CHECK(j["metrics"]["hit1"] == 0.5);
  CHECK(j["seed"] == 77);
  CHECK(j.contains("tool_version"));

  auto data_error = [&] {
    try {
      load_checkpoint(path);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::kData;
    }
    return false;
  };
  const std::string blob = read_file(path);
  write_file(path, blob.substr(0, blob.size() - 8));
  CHECK(data_error());
  write_file(path, blob);

  auto bad = j;
  bad["tensors"][0]["rows"] = 3;
  write_file(path + ".json", bad.dump());
  CHECK(data_error());
  bad = j;
  bad["hyperparams"]["hidden"] = 32;
  write_file(path + ".json", bad.dump());
  CHECK(data_error());
  write_file(path + ".json", "{oops");
  CHECK(data_error());
  fs::remove_all(dir);
}

TEST_CASE("train report serializes every epoch") {
  TrainReport r;
  r.stop_reason = "epoch_cap";
  r.epochs.push_back({1, 0.7, 0.69, 0.2, 0.1, 1e-3});
  r.epochs.push_back({2, 0.6, 0.65, 0.3, 0.2, 1e-3});
  const auto j = nlohmann::json::parse(train_report_to_json(r));
  CHECK(j["epochs"].size() == 2);
  CHECK(j["stop_reason"] == "epoch_cap");
}
