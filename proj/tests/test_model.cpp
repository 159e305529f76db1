#include <algorithm>
#include <cmath>
#include <numeric>

#include "cgnn/error.hpp"
#include "cgnn/model.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/oracles.hpp"
#include "support/synthetic.hpp"

using namespace cgnn;
using namespace cgnn::testing;

namespace {

Hyperparams small_hp(int hidden = 8, int layers = 2, uint64_t seed = 3) {
  Hyperparams hp;
  hp.hidden = hidden;
  hp.layers = layers;
  hp.name_buckets = 16;
  hp.seed = seed;
  return hp;
}

ProgramGraph build(const std::string& src) {
  ParseResult r = parse_sources({{"a.js", src}});
  REQUIRE(r.diagnostics.empty());
  const std::set<std::string> k(default_prune_kinds().begin(), default_prune_kinds().end());
  return link_identifiers(prune(r.graph, k));
}

// Path 0 - 1 - ... - (n-1) with messages both ways.
MessageGraph chain(int n) {
  MessageGraph mg;
  for (int i = 0; i < n; ++i) {
    mg.ids.push_back(static_cast<NodeId>(i));
    mg.row_of.push_back(i);
    mg.kind.push_back(i % 5);
    mg.name.push_back(i % 7);
    mg.par.push_back(i % 3);
    mg.arg.push_back(i % 2);
  }
  for (int i = 0; i + 1 < n; ++i) {
    mg.src.push_back(i);
    mg.dst.push_back(i + 1);
    mg.type.push_back(0);
    mg.src.push_back(i + 1);
    mg.dst.push_back(i);
    mg.type.push_back(1);
  }
  return mg;
}

void zero_layers(ModelParams& p) {
  for (size_t i = 0; i < p.specs.size(); ++i)
    if (p.specs[i].name.rfind("layer", 0) == 0) p.tensor(i).setZero();
}

}  // namespace

TEST_CASE("initialization is seeded and bounded") {
  const ModelParams a = init_model(small_hp(16, 3, 1));
  const ModelParams b = init_model(small_hp(16, 3, 1));
  const ModelParams c = init_model(small_hp(16, 3, 2));
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  const double bound = 1.0 / std::sqrt(16.0);
  for (double x : a.data) {
    CHECK(std::isfinite(x));
    CHECK(std::abs(x) <= bound);
  }
  size_t total = 0;
  for (const TensorSpec& s : a.specs) total += s.size();
  CHECK(total == a.data.size());
}

TEST_CASE("count buckets saturate at sixteen") {
  CHECK(count_bucket(0) == 0);
  CHECK(count_bucket(15) == 15);
  CHECK(count_bucket(16) == 16);
  CHECK(count_bucket(20) == count_bucket(30));
  CHECK(name_bucket(std::nullopt, 64) == 64);
  const int b = name_bucket(std::string("showPosition"), 64);
  CHECK(b >= 0);
  CHECK(b < 64);
  CHECK(b == name_bucket(std::string("showPosition"), 64));
}

TEST_CASE("encoding depends only on the four features") {
  const ModelParams p = init_model(small_hp());
  MessageGraph mg = chain(4);
  mg.kind = {2, 2, 2, 1};
  mg.name = {5, 5, 5, 5};
  mg.par = {count_bucket(20), count_bucket(30), 0, 0};
  mg.arg = {1, 1, 1, 1};
  const Mat h0 = encode_nodes(mg, p);
  CHECK((h0.row(0) - h0.row(1)).norm() == 0.0);
  CHECK((h0.row(0) - h0.row(2)).norm() > 0.0);
  CHECK((h0.row(2) - h0.row(3)).norm() > 0.0);
  const Table ref = reference_encode(mg, p);
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < p.hp.hidden; ++c) CHECK(h0(i, c) == doctest::Approx(ref[i][c]).epsilon(1e-12));

  ModelParams z = p;
  std::fill(z.data.begin(), z.data.end(), 0.0);
  CHECK(encode_nodes(mg, z).norm() == 0.0);
}

TEST_CASE("an isolated node follows the reference update") {
  const ModelParams p = init_model(small_hp(6, 3, 4));
  MessageGraph mg = chain(1);
  const Mat h = forward(mg, encode_nodes(mg, p), p);
  const Table ref = reference_forward(mg, reference_encode(mg, p), p);
  for (int c = 0; c < 6; ++c) CHECK(h(0, c) == doctest::Approx(ref[0][c]).epsilon(1e-9));
}

TEST_CASE("zero layer weights leave the encoding unchanged") {
  ModelParams p = init_model(small_hp(8, 4, 6));
  zero_layers(p);
  const MessageGraph mg = chain(6);
  const Mat h0 = encode_nodes(mg, p);
  CHECK((forward(mg, h0, p) - h0).norm() == 0.0);
}

TEST_CASE("forward pass matches the reference on a chain") {
  const ModelParams p = init_model(small_hp(8, 3, 8));
  const MessageGraph mg = chain(7);
  const Mat h = forward(mg, encode_nodes(mg, p), p);
  const Table ref = reference_forward(mg, reference_encode(mg, p), p);
  for (int i = 0; i < 7; ++i)
    for (int c = 0; c < 8; ++c) CHECK(h(i, c) == doctest::Approx(ref[i][c]).epsilon(1e-9));
}

TEST_CASE("a node is unaffected by nodes farther than the layer count") {
  const int layers = 3;
  const ModelParams p = init_model(small_hp(8, layers, 10));
  MessageGraph a = chain(9);
  MessageGraph b = a;
  b.kind[0] = 4;
  b.name[0] = 12;
  const Mat ha = forward(a, encode_nodes(a, p), p);
  const Mat hb = forward(b, encode_nodes(b, p), p);
  for (int i = 0; i < 9; ++i) {
    const double d = (ha.row(i) - hb.row(i)).norm();
    if (i > layers) {
      CHECK(d == 0.0);
    } else {
      CHECK(d > 0.0);
    }
  }
}

TEST_CASE("relabeling nodes permutes the output") {
  const ModelParams p = init_model(small_hp(8, 3, 12));
  const MessageGraph mg = chain(8);
  const std::vector<int32_t> perm = {5, 2, 7, 0, 3, 6, 1, 4};
  MessageGraph q = mg;
  for (size_t i = 0; i < 8; ++i) {
    q.kind[perm[i]] = mg.kind[i];
    q.name[perm[i]] = mg.name[i];
    q.par[perm[i]] = mg.par[i];
    q.arg[perm[i]] = mg.arg[i];
  }
  std::vector<size_t> order(mg.num_edges());
  std::iota(order.begin(), order.end(), 0);
  std::reverse(order.begin(), order.end());
  for (size_t k = 0; k < order.size(); ++k) {
    q.src[k] = perm[mg.src[order[k]]];
    q.dst[k] = perm[mg.dst[order[k]]];
    q.type[k] = mg.type[order[k]];
  }
  const Mat h = forward(mg, encode_nodes(mg, p), p);
  const Mat hq = forward(q, encode_nodes(q, p), p);
  for (int i = 0; i < 8; ++i)
    for (int c = 0; c < 8; ++c) CHECK(hq(perm[i], c) == doctest::Approx(h(i, c)).epsilon(1e-9));
}

TEST_CASE("a zero head scores every pair one half") {
  ModelParams p = init_model(small_hp());
  for (const char* t : {"head.W", "head.b1", "head.w2", "head.b2"}) p.tensor(t).setZero();
  const MessageGraph mg = chain(5);
  const Mat h = forward(mg, encode_nodes(mg, p), p);
  const Eigen::VectorXd s = score_pairs(h, {{0, 1}, {3, 4}, {2, 2}}, p);
  for (int k = 0; k < 3; ++k) CHECK(s(k) == 0.5);
}

TEST_CASE("batched scoring equals one pair at a time") {
  const ModelParams p = init_model(small_hp(16, 2, 14));
  const MessageGraph mg = chain(40);
  const Mat h = forward(mg, encode_nodes(mg, p), p);
  Rng rng(1);
  PairRows pairs;
  for (int k = 0; k < 1000; ++k)
    pairs.push_back({static_cast<int32_t>(uniform_index(rng, 40)),
                     static_cast<int32_t>(uniform_index(rng, 40))});
  const Eigen::VectorXd batch = score_pairs(h, pairs, p);
  const PairScorer head = make_pair_scorer(h, p);
  for (size_t k = 0; k < pairs.size(); ++k) {
    const double one = score_pairs(h, {pairs[k]}, p)(0);
    CHECK(std::abs(batch(k) - one) <= 1e-7);
    CHECK(std::abs(head.logit(pairs[k].first, pairs[k].second) -
                   score_logits(h, {pairs[k]}, p)(0)) <= 1e-9);
  }
}

TEST_CASE("probabilities stay strictly inside the unit interval") {
  Eigen::VectorXd l(4);
  l << -1e6, -40.0, 40.0, 1e6;
  const Eigen::VectorXd s = logits_to_probs(l);
  for (int k = 0; k < 4; ++k) {
    CHECK(s(k) > 0.0);
    CHECK(s(k) < 1.0);
  }
}

TEST_CASE("library loss equals the reference loss") {
  const ModelParams p = init_model(small_hp(8, 3, 16));
  const MessageGraph mg = chain(10);
  const PairRows pairs = {{0, 9}, {3, 4}, {5, 1}, {7, 7}};
  const std::vector<double> labels = {1, 0, 1, 0};
  std::vector<double> grad;
  const double loss = loss_and_gradient(mg, p, pairs, labels, &grad);
  CHECK(loss == doctest::Approx(reference_loss(mg, p, pairs, labels)).epsilon(1e-10));
  CHECK(grad.size() == p.data.size());
}

TEST_CASE("gradients of unused embedding rows are exactly zero") {
  const ModelParams p = init_model(small_hp(8, 2, 18));
  const MessageGraph mg = chain(4);
  std::vector<double> grad;
  loss_and_gradient(mg, p, {{0, 3}, {1, 2}}, {1, 0}, &grad);
  const TensorSpec& names = p.specs[p.tensor_index("name_emb")];
  const std::set<int32_t> used(mg.name.begin(), mg.name.end());
  size_t unused_rows = 0;
  for (int r = 0; r < names.rows; ++r) {
    double sum = 0.0;
    for (int c = 0; c < names.cols; ++c) sum += std::abs(grad[names.offset + r * names.cols + c]);
    if (used.count(r)) {
      CHECK(sum > 0.0);
    } else {
      CHECK(sum == 0.0);
      ++unused_rows;
    }
  }
  CHECK(unused_rows > 0);
}

TEST_CASE("analytic gradients agree with central differences") {
  const ModelParams p = init_model(small_hp(8, 2, 2));
  const MessageGraph mg = chain(6);
  const GradCheck gc = gradient_check(mg, p, {{0, 5}, {2, 3}, {4, 1}}, {1, 0, 1}, 1e-6, 1e-4);
  CHECK(gc.pass_share() >= 0.99);
  CHECK(gc.tensors_checked.size() == p.specs.size());
}

TEST_CASE("initial loss on a balanced batch is near ln 2") {
  const ProgramGraph g = synthetic_graph({});
  const CallEdgeSet pos = name_match_edges(g);
  Hyperparams hp;
  hp.seed = 1;
  const ModelParams p = init_model(hp);
  const MessageGraph mg = build_message_graph(g, compute_features(g), nullptr, p);
  PairRows pairs;
  std::vector<double> labels;
  for (const auto& [key, e] : pos.edges) {
    pairs.push_back({mg.row(key.first), mg.row(key.second)});
    labels.push_back(1);
  }
  for (const auto& [cs, fn] : sample_negatives(g, pos, pos.size(), 1)) {
    pairs.push_back({mg.row(cs), mg.row(fn)});
    labels.push_back(0);
  }
  const double loss = loss_and_gradient(mg, p, pairs, labels, nullptr);
  CHECK(std::abs(loss - std::log(2.0)) <= 0.1);
}

TEST_CASE("message graph honours the edge switches") {
  const ProgramGraph g = build("function f(a) { return a; }\nf(1);\nf(2);\n");
  const Endpoints ep = enumerate_endpoints(g);
  CallEdgeSet calls;
  for (NodeId cs : ep.call_sites) calls.add({cs, ep.function_defs[0], kStatic, 0});
  const FeatureTable ft = compute_features(g);
  Hyperparams hp = small_hp();
  const ModelParams p = init_model(hp);
  const MessageGraph full = build_message_graph(g, ft, &calls, p);
  const MessageGraph none = build_message_graph(g, ft, nullptr, p);
  CHECK(full.num_nodes() == g.nodes.size());
  CHECK(full.num_edges() == g.edges.size() + 2 * calls.size());
  CHECK(none.num_edges() == g.edges.size());

  hp.semantic_edges = false;
  hp.call_msg_edges = false;
  const MessageGraph bare = build_message_graph(g, ft, &calls, init_model(hp));
  const size_t sem = g.count_edges(EdgeType::kSemantic) + g.count_edges(EdgeType::kSemanticRev);
  CHECK(sem > 0);
  CHECK(bare.num_edges() == g.edges.size() - sem);

  const ModelParams tiny = init_model(small_hp(), {"Program"});
  CHECK(build_message_graph(g, ft, nullptr, tiny).oov_kinds > 0);
}

TEST_CASE("disabled node features encode every node alike") {
  Hyperparams hp = small_hp();
  hp.node_features = false;
  const ModelParams p = init_model(hp);
  const ProgramGraph g = build("function f(a, b) { return a; }\nf(1);\n");
  const MessageGraph mg = build_message_graph(g, compute_features(g), nullptr, p);
  const Mat h0 = encode_nodes(mg, p);
  for (Eigen::Index i = 1; i < h0.rows(); ++i) CHECK((h0.row(i) - h0.row(0)).norm() == 0.0);
}

TEST_CASE("hyperparameters round trip and reject bad input") {
  Hyperparams hp = small_hp();
  hp.lr_init = 0.02;
  hp.negatives = "per_callsite";
  hp.semantic_edges = false;
  const Hyperparams back = hyperparams_from_json(hyperparams_to_json(hp));
  CHECK(hyperparams_to_json(back) == hyperparams_to_json(hp));
  CHECK(hyperparams_from_json("{}").hidden == 64);

  auto usage = [](const std::string& text) {
    try {
      hyperparams_from_json(text);
    } catch (const Error& e) {
      return e.kind() == ErrorKind::kUsage;
    }
    return false;
  };
  CHECK(usage("{\"hiddden\": 3}"));
  CHECK(usage("{\"hidden_dim\": 0}"));
  CHECK(usage("{\"split\": [0.5, 0.1, 0.1]}"));
  CHECK(usage("{\"negatives\": \"hard\"}"));
  CHECK(usage("[1]"));
}
