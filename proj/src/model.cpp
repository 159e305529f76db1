#include "cgnn/model.hpp"

#include <algorithm>
#include <cmath>

#include "cgnn/error.hpp"
#include "cgnn/js/ast.hpp"
#include "cgnn/util.hpp"
#include "json.hpp"

namespace cgnn {

using ojson = nlohmann::ordered_json;
using Eigen::VectorXd;

// ---------------------------------------------------------------------------
// Hyperparameters

void Hyperparams::validate() const {
  if (layers < 1) throw_usage("layers must be >= 1");
  if (hidden < 1) throw_usage("hidden_dim must be >= 1");
  if (name_buckets < 1) throw_usage("name_buckets must be >= 1");
  if (max_epochs < 0) throw_usage("max_epochs must be >= 0");
  if (batch_size < 2) throw_usage("batch_size must be >= 2");
  if (!(lr_init > 0)) throw_usage("lr_init must be > 0");
  if (!(lr_floor > 0)) throw_usage("lr_floor must be > 0");
  if (!(plateau_factor > 0 && plateau_factor < 1))
    throw_usage("plateau_factor must lie in (0, 1)");
  if (patience < 0) throw_usage("patience must be >= 0");
  if (split_train < 0 || split_val < 0 || split_test < 0 ||
      std::abs(split_train + split_val + split_test - 1.0) > 1e-9)
    throw_usage("split fractions must be non-negative and sum to 1");
  if (negatives != "uniform" && negatives != "per_callsite")
    throw_usage("negatives must be \"uniform\" or \"per_callsite\"");
}

std::string hyperparams_to_json(const Hyperparams& hp) {
  ojson j;
  j["layers"] = hp.layers;
  j["hidden_dim"] = hp.hidden;
  j["name_buckets"] = hp.name_buckets;
  j["max_epochs"] = hp.max_epochs;
  j["batch_size"] = hp.batch_size;
  j["lr_init"] = hp.lr_init;
  j["lr_floor"] = hp.lr_floor;
  j["plateau_factor"] = hp.plateau_factor;
  j["patience"] = hp.patience;
  j["split"] = {hp.split_train, hp.split_val, hp.split_test};
  j["seed"] = hp.seed;
  j["semantic_edges"] = hp.semantic_edges;
  j["node_features"] = hp.node_features;
  j["call_msg_edges"] = hp.call_msg_edges;
  j["negatives"] = hp.negatives;
  return j.dump();
}

Hyperparams hyperparams_from_json(std::string_view text) {
  Hyperparams hp;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw_usage(std::string("hyperparameters are not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw_usage("hyperparameters must be a JSON object");
  try {
    for (const auto& [k, v] : j.items()) {
      if (k == "layers") hp.layers = v.get<int>();
      else if (k == "hidden_dim") hp.hidden = v.get<int>();
      else if (k == "name_buckets") hp.name_buckets = v.get<int>();
      else if (k == "max_epochs") hp.max_epochs = v.get<int>();
      else if (k == "batch_size") hp.batch_size = v.get<size_t>();
      else if (k == "lr_init") hp.lr_init = v.get<double>();
      else if (k == "lr_floor") hp.lr_floor = v.get<double>();
      else if (k == "plateau_factor") hp.plateau_factor = v.get<double>();
      else if (k == "patience") hp.patience = v.get<int>();
      else if (k == "split") {
        auto s = v.get<std::vector<double>>();
        if (s.size() != 3) throw_usage("split needs three fractions");
        hp.split_train = s[0];
        hp.split_val = s[1];
        hp.split_test = s[2];
      } else if (k == "seed") hp.seed = v.get<uint64_t>();
      else if (k == "semantic_edges") hp.semantic_edges = v.get<bool>();
      else if (k == "node_features") hp.node_features = v.get<bool>();
      else if (k == "call_msg_edges") hp.call_msg_edges = v.get<bool>();
      else if (k == "negatives") hp.negatives = v.get<std::string>();
      else throw_usage("unknown hyperparameter \"" + k + "\"");
    }
  } catch (const nlohmann::json::exception& e) {
    throw_usage(std::string("bad hyperparameter value: ") + e.what());
  }
  hp.validate();
  return hp;
}

// ---------------------------------------------------------------------------
// Parameters

std::vector<std::string> default_kind_vocab() {
  std::vector<std::string> v;
  for (std::string_view k : js::kind_vocabulary()) v.emplace_back(k);
  return v;
}

ModelParams::ModelParams(const Hyperparams& h, std::vector<std::string> vocab)
    : hp(h), kind_vocab(std::move(vocab)) {
  const int H = hp.hidden;
  size_t offset = 0;
  auto add = [&](std::string name, int rows, int cols) {
    specs.push_back({std::move(name), rows, cols, offset});
    offset += static_cast<size_t>(rows) * cols;
  };
  add("kind_emb", static_cast<int>(kind_vocab.size()) + 1, H);
  add("name_emb", hp.name_buckets + 1, H);
  add("par_emb", kCountBuckets, H);
  add("arg_emb", kCountBuckets, H);
  add("edge_emb", kNumEdgeTypes, H);
  for (int l = 0; l < hp.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    for (const char* w : {"W1", "W2", "W3", "W4", "W5"}) add(p + w, H, H);
    for (const char* v : {"h_gamma", "h_beta", "e_gamma", "e_beta"})
      add(p + v, 1, H);
  }
  add("head.W", H, 2 * H);
  add("head.b1", 1, H);
  add("head.w2", 1, H);
  add("head.b2", 1, 1);
  data.assign(offset, 0.0);
}

size_t ModelParams::tensor_index(std::string_view name) const {
  for (size_t i = 0; i < specs.size(); ++i) {
    if (specs[i].name == name) return i;
  }
  throw_not_found("no tensor named " + std::string(name));
}

MatMap ModelParams::tensor(size_t i) {
  const TensorSpec& s = specs[i];
  return MatMap(data.data() + s.offset, s.rows, s.cols);
}

ConstMatMap ModelParams::tensor(size_t i) const {
  const TensorSpec& s = specs[i];
  return ConstMatMap(data.data() + s.offset, s.rows, s.cols);
}

MatMap ModelParams::tensor(std::string_view name) {
  return tensor(tensor_index(name));
}

ConstMatMap ModelParams::tensor(std::string_view name) const {
  return tensor(tensor_index(name));
}

ModelParams init_model(const Hyperparams& hp,
                       std::vector<std::string> kind_vocab) {
  hp.validate();
  ModelParams p(hp, std::move(kind_vocab));
  Rng rng(hp.seed);
  const double bound = 1.0 / std::sqrt(static_cast<double>(hp.hidden));
  for (double& x : p.data) x = (2.0 * uniform_unit(rng) - 1.0) * bound;
  return p;
}

int count_bucket(int count) {
  return std::clamp(count, 0, kCountBuckets - 1);
}

int name_bucket(const std::optional<std::string>& name, int buckets) {
  if (!name) return buckets;  // reserved no-name row
  return static_cast<int>(fnv1a64(*name) % static_cast<uint64_t>(buckets));
}

// ---------------------------------------------------------------------------
// Message graph

int32_t MessageGraph::row(NodeId id) const {
  if (id >= row_of.size() || row_of[id] < 0)
    throw_not_found("node " + std::to_string(id) + " is not in the graph");
  return row_of[id];
}

MessageGraph build_message_graph(const ProgramGraph& graph,
                                 const FeatureTable& features,
                                 const CallEdgeSet* call_edges,
                                 const ModelParams& params) {
  const Hyperparams& hp = params.hp;
  if (features.size() != graph.nodes.size())
    throw_usage("feature table does not match the graph");
  MessageGraph mg;
  mg.row_of.assign(graph.nodes.empty() ? 0 : graph.max_id() + 1, -1);
  std::map<std::string, int32_t> vocab;
  for (size_t i = 0; i < params.kind_vocab.size(); ++i)
    vocab[params.kind_vocab[i]] = static_cast<int32_t>(i);
  const int32_t oov = static_cast<int32_t>(params.kind_vocab.size());
  for (size_t i = 0; i < graph.nodes.size(); ++i) {
    const SyntaxNode& n = graph.nodes[i];
    mg.row_of[n.id] = static_cast<int32_t>(mg.ids.size());
    mg.ids.push_back(n.id);
    const FeatureRow& f = features[i];
    if (!hp.node_features) {
      mg.kind.push_back(oov);
      mg.name.push_back(hp.name_buckets);
      mg.par.push_back(0);
      mg.arg.push_back(0);
      continue;
    }
    auto it = vocab.find(f.node_type);
    if (it == vocab.end()) ++mg.oov_kinds;
    mg.kind.push_back(it == vocab.end() ? oov : it->second);
    mg.name.push_back(name_bucket(f.name, hp.name_buckets));
    mg.par.push_back(count_bucket(f.number_of_parameter));
    mg.arg.push_back(count_bucket(f.number_of_argument));
  }
  auto add = [&](NodeId s, NodeId d, EdgeType t) {
    mg.src.push_back(mg.row(s));
    mg.dst.push_back(mg.row(d));
    mg.type.push_back(static_cast<uint8_t>(t));
  };
  for (const Edge& e : graph.edges) {
    if (e.type == EdgeType::kCallMsg) continue;
    if (!hp.semantic_edges &&
        (e.type == EdgeType::kSemantic || e.type == EdgeType::kSemanticRev))
      continue;
    add(e.src, e.dst, e.type);
  }
  if (call_edges && hp.call_msg_edges) {
    for (const auto& [key, e] : call_edges->edges) {
      add(e.callsite, e.callee, EdgeType::kCallMsg);
      add(e.callee, e.callsite, EdgeType::kCallMsg);
    }
  }
  return mg;
}

Mat encode_nodes(const MessageGraph& mg, const ModelParams& params) {
  const int H = params.hp.hidden;
  const ConstMatMap kind = params.tensor("kind_emb");
  const ConstMatMap name = params.tensor("name_emb");
  const ConstMatMap par = params.tensor("par_emb");
  const ConstMatMap arg = params.tensor("arg_emb");
  Mat h(mg.num_nodes(), H);
  for (size_t i = 0; i < mg.num_nodes(); ++i) {
    h.row(i) = kind.row(mg.kind[i]) + name.row(mg.name[i]) +
               par.row(mg.par[i]) + arg.row(mg.arg[i]);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Forward

namespace {

struct LayerView {
  ConstMatMap W1, W2, W3, W4, W5, h_gamma, h_beta, e_gamma, e_beta;
};

LayerView layer_view(const ModelParams& p, int l) {
  const std::string pre = "layer" + std::to_string(l) + ".";
  return {p.tensor(pre + "W1"),      p.tensor(pre + "W2"),
          p.tensor(pre + "W3"),      p.tensor(pre + "W4"),
          p.tensor(pre + "W5"),      p.tensor(pre + "h_gamma"),
          p.tensor(pre + "h_beta"),  p.tensor(pre + "e_gamma"),
          p.tensor(pre + "e_beta")};
}

// Row-wise standardization. Writes xhat and 1/std per row.
void normalize_rows(const Mat& x, Mat& xhat, VectorXd& inv_std) {
  const double H = static_cast<double>(x.cols());
  xhat.resize(x.rows(), x.cols());
  inv_std.resize(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / H;
    const auto centered = x.row(r).array() - mean;
    const double var = centered.square().sum() / H;
    const double is = 1.0 / std::sqrt(var + kNormEps);
    inv_std(r) = is;
    xhat.row(r) = centered * is;
  }
}

Mat affine_rows(const Mat& xhat, const ConstMatMap& gamma,
                const ConstMatMap& beta) {
  Mat y = xhat.array().rowwise() * gamma.row(0).array();
  y.rowwise() += beta.row(0);
  return y;
}

Mat sigmoid(const Mat& x) {
  return x.unaryExpr([](double v) { return 1.0 / (1.0 + std::exp(-v)); });
}

// Backward of y = gamma * xhat + beta, xhat = standardize(x), per row.
Mat normalize_backward(const Mat& dy, const Mat& xhat, const VectorXd& inv_std,
                       const ConstMatMap& gamma, MatMap dgamma, MatMap dbeta) {
  dgamma.row(0) += (dy.array() * xhat.array()).colwise().sum().matrix();
  dbeta.row(0) += dy.colwise().sum();
  Mat dxhat = dy.array().rowwise() * gamma.row(0).array();
  const double H = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const double m1 = dxhat.row(r).sum() / H;
    const double m2 = dxhat.row(r).dot(xhat.row(r)) / H;
    dx.row(r) = inv_std(r) *
                (dxhat.row(r).array() - m1 - xhat.row(r).array() * m2).matrix();
  }
  return dx;
}

Mat initial_edges(const MessageGraph& mg, const ModelParams& params) {
  const ConstMatMap emb = params.tensor("edge_emb");
  Mat e(mg.num_edges(), params.hp.hidden);
  for (size_t k = 0; k < mg.num_edges(); ++k) e.row(k) = emb.row(mg.type[k]);
  return e;
}

}  // namespace

Mat forward(const MessageGraph& mg, const Mat& h0, const ModelParams& params,
            ForwardCache* cache) {
  const int H = params.hp.hidden;
  const size_t N = mg.num_nodes(), M = mg.num_edges();
  Mat h = h0;
  Mat e = initial_edges(mg, params);
  if (cache) cache->layers.assign(params.hp.layers, LayerCache{});
  for (int l = 0; l < params.hp.layers; ++l) {
    const LayerView w = layer_view(params, l);
    const Mat A = h * w.W4.transpose();
    const Mat B = h * w.W5.transpose();
    Mat pre_e = e * w.W3.transpose();
    for (size_t k = 0; k < M; ++k)
      pre_e.row(k) += A.row(mg.dst[k]) + B.row(mg.src[k]);
    Mat xhat_e;
    VectorXd inv_std_e;
    normalize_rows(pre_e, xhat_e, inv_std_e);
    const Mat e_hat = e + affine_rows(xhat_e, w.e_gamma, w.e_beta).cwiseMax(0.0);
    const Mat gate = sigmoid(e_hat);
    Mat den = Mat::Constant(N, H, kGateEps);
    for (size_t k = 0; k < M; ++k) den.row(mg.dst[k]) += gate.row(k);
    const Mat V = h * w.W2.transpose();
    Mat pre_h = h * w.W1.transpose();
    for (size_t k = 0; k < M; ++k) {
      const int i = mg.dst[k];
      pre_h.row(i).array() +=
          gate.row(k).array() / den.row(i).array() * V.row(mg.src[k]).array();
    }
    Mat xhat_h;
    VectorXd inv_std_h;
    normalize_rows(pre_h, xhat_h, inv_std_h);
    Mat h_next = h + affine_rows(xhat_h, w.h_gamma, w.h_beta).cwiseMax(0.0);
    if (cache) {
      LayerCache& c = cache->layers[l];
      c.h_in = std::move(h);
      c.e_in = std::move(e);
      c.xhat_e = std::move(xhat_e);
      c.inv_std_e = std::move(inv_std_e);
      c.gate = gate;
      c.den = std::move(den);
      c.v = V;
      c.xhat_h = std::move(xhat_h);
      c.inv_std_h = std::move(inv_std_h);
    }
    h = std::move(h_next);
    e = e_hat;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Scoring head

PairScorer make_pair_scorer(const Mat& h, const ModelParams& params) {
  const int H = params.hp.hidden;
  const ConstMatMap W = params.tensor("head.W");
  PairScorer s;
  s.hc = h * W.leftCols(H).transpose();
  s.hf = h * W.rightCols(H).transpose();
  s.b1 = params.tensor("head.b1").row(0);
  s.w2 = params.tensor("head.w2").row(0);
  s.b2 = params.tensor("head.b2")(0, 0);
  return s;
}

double PairScorer::logit(int32_t cs, int32_t fn) const {
  if (cs < 0 || fn < 0 || cs >= hc.rows() || fn >= hc.rows())
    throw_not_found("pair endpoint outside the embedding table");
  return (hc.row(cs) + hf.row(fn) + b1).cwiseMax(0.0).dot(w2) + b2;
}

VectorXd score_logits(const Mat& h, const PairRows& pairs,
                      const ModelParams& params) {
  const PairScorer s = make_pair_scorer(h, params);
  VectorXd out(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p)
    out(p) = s.logit(pairs[p].first, pairs[p].second);
  return out;
}

VectorXd logits_to_probs(const VectorXd& logits) {
  return logits.unaryExpr([](double z) {
    z = std::clamp(z, -35.0, 35.0);
    return 1.0 / (1.0 + std::exp(-z));
  });
}

VectorXd score_pairs(const Mat& h, const PairRows& pairs,
                     const ModelParams& params) {
  return logits_to_probs(score_logits(h, pairs, params));
}

// ---------------------------------------------------------------------------
// Backward

double loss_and_gradient(const MessageGraph& mg, const ModelParams& params,
                         const PairRows& pairs, const std::vector<double>& labels,
                         std::vector<double>* grad_out) {
  if (pairs.size() != labels.size() || pairs.empty())
    throw_usage("pairs and labels must be non-empty and of equal length");
  const int H = params.hp.hidden;
  const size_t N = mg.num_nodes(), M = mg.num_edges();
  ForwardCache cache;
  const Mat h0 = encode_nodes(mg, params);
  const Mat hL = forward(mg, h0, params, grad_out ? &cache : nullptr);

  const ConstMatMap W = params.tensor("head.W");
  const ConstMatMap b1 = params.tensor("head.b1");
  const ConstMatMap w2 = params.tensor("head.w2");
  const double b2 = params.tensor("head.b2")(0, 0);
  const double inv_b = 1.0 / static_cast<double>(pairs.size());

  // Head forward, kept per pair for the backward pass.
  Mat Z(pairs.size(), 2 * H);
  for (size_t p = 0; p < pairs.size(); ++p) {
    Z.row(p).head(H) = hL.row(pairs[p].first);
    Z.row(p).tail(H) = hL.row(pairs[p].second);
  }
  Mat U = Z * W.transpose();
  U.rowwise() += b1.row(0);
  const Mat R = U.cwiseMax(0.0);
  const VectorXd logit = (R * w2.row(0).transpose()).array() + b2;
  double loss = 0.0;
  VectorXd dlogit(pairs.size());
  for (size_t p = 0; p < pairs.size(); ++p) {
    const double z = logit(p), y = labels[p];
    // softplus(z) - y z, stable for large |z|.
    const double sp = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += sp - y * z;
    dlogit(p) = (1.0 / (1.0 + std::exp(-z)) - y) * inv_b;
  }
  loss *= inv_b;
  if (!grad_out) return loss;

  std::vector<double>& g = *grad_out;
  g.assign(params.data.size(), 0.0);
  auto gt = [&](std::string_view name) {
    const TensorSpec& s = params.specs[params.tensor_index(name)];
    return MatMap(g.data() + s.offset, s.rows, s.cols);
  };

  gt("head.b2")(0, 0) += dlogit.sum();
  gt("head.w2").row(0) += dlogit.transpose() * R;
  Mat dU = dlogit * w2.row(0);
  dU.array() *= (U.array() > 0.0).cast<double>();
  gt("head.W") += dU.transpose() * Z;
  gt("head.b1").row(0) += dU.colwise().sum();
  const Mat dZ = dU * W;
  Mat dh = Mat::Zero(N, H);
  for (size_t p = 0; p < pairs.size(); ++p) {
    dh.row(pairs[p].first) += dZ.row(p).head(H);
    dh.row(pairs[p].second) += dZ.row(p).tail(H);
  }

  Mat de = Mat::Zero(M, H);
  for (int l = params.hp.layers - 1; l >= 0; --l) {
    const LayerCache& c = cache.layers[l];
    const LayerView w = layer_view(params, l);
    const std::string pre = "layer" + std::to_string(l) + ".";
    const Mat& h = c.h_in;

    // Node update: h' = h + relu(norm(h W1^T + agg)).
    Mat dy_h = dh;
    {
      const Mat y = affine_rows(c.xhat_h, w.h_gamma, w.h_beta);
      dy_h.array() *= (y.array() > 0.0).cast<double>();
    }
    const Mat dpre_h = normalize_backward(dy_h, c.xhat_h, c.inv_std_h,
                                          w.h_gamma, gt(pre + "h_gamma"),
                                          gt(pre + "h_beta"));
    Mat dh_prev = dh;
    gt(pre + "W1") += dpre_h.transpose() * h;
    dh_prev += dpre_h * w.W1;

    // agg_i = sum_k eta_k * V[src_k], eta_k = gate_k / den_i.
    Mat dV = Mat::Zero(N, H);
    Mat ds = Mat::Zero(M, H);
    Mat dden = Mat::Zero(N, H);
    for (size_t k = 0; k < M; ++k) {
      const int i = mg.dst[k], j = mg.src[k];
      const auto inv_den = c.den.row(i).array().inverse();
      const auto deta = dpre_h.row(i).array() * c.v.row(j).array();
      dV.row(j).array() += dpre_h.row(i).array() * c.gate.row(k).array() * inv_den;
      ds.row(k).array() = deta * inv_den;
      dden.row(i).array() -= deta * c.gate.row(k).array() * inv_den.square();
    }
    for (size_t k = 0; k < M; ++k) ds.row(k) += dden.row(mg.dst[k]);
    gt(pre + "W2") += dV.transpose() * h;
    dh_prev += dV * w.W2;

    // Edge update: e_hat = e + relu(norm(e W3^T + h_i W4^T + h_j W5^T)).
    Mat de_hat = de;
    de_hat.array() += ds.array() * c.gate.array() * (1.0 - c.gate.array());
    Mat dy_e = de_hat;
    {
      const Mat y = affine_rows(c.xhat_e, w.e_gamma, w.e_beta);
      dy_e.array() *= (y.array() > 0.0).cast<double>();
    }
    const Mat dpre_e = normalize_backward(dy_e, c.xhat_e, c.inv_std_e,
                                          w.e_gamma, gt(pre + "e_gamma"),
                                          gt(pre + "e_beta"));
    gt(pre + "W3") += dpre_e.transpose() * c.e_in;
    Mat de_prev = de_hat + dpre_e * w.W3;
    Mat dA = Mat::Zero(N, H), dB = Mat::Zero(N, H);
    for (size_t k = 0; k < M; ++k) {
      dA.row(mg.dst[k]) += dpre_e.row(k);
      dB.row(mg.src[k]) += dpre_e.row(k);
    }
    gt(pre + "W4") += dA.transpose() * h;
    gt(pre + "W5") += dB.transpose() * h;
    dh_prev += dA * w.W4 + dB * w.W5;

    dh = std::move(dh_prev);
    de = std::move(de_prev);
  }

  MatMap d_edge = gt("edge_emb");
  for (size_t k = 0; k < M; ++k) d_edge.row(mg.type[k]) += de.row(k);
  MatMap d_kind = gt("kind_emb");
  MatMap d_name = gt("name_emb");
  MatMap d_par = gt("par_emb");
  MatMap d_arg = gt("arg_emb");
  for (size_t i = 0; i < N; ++i) {
    d_kind.row(mg.kind[i]) += dh.row(i);
    d_name.row(mg.name[i]) += dh.row(i);
    d_par.row(mg.par[i]) += dh.row(i);
    d_arg.row(mg.arg[i]) += dh.row(i);
  }
  return loss;
}

}  // namespace cgnn
