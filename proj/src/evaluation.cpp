#include "cgnn/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <set>

#include "cgnn/error.hpp"
#include "cgnn/js/ast.hpp"
#include "cgnn/util.hpp"
#include "json.hpp"

namespace cgnn {

using ojson = nlohmann::ordered_json;

Splits split_edges(const CallEdgeSet& edges, double train, double val,
                   double test, uint64_t seed) {
  if (train < 0 || val < 0 || test < 0 ||
      std::abs(train + val + test - 1.0) > 1e-9)
    throw_usage("split ratios must be non-negative and sum to 1");
  std::vector<CallEdge> list = edges.list();
  Rng rng(seed);
  seeded_shuffle(list, rng);
  const size_t n = list.size();
  const size_t n_train = static_cast<size_t>(std::floor(n * train + 1e-9));
  const size_t n_val =
      std::min(n - n_train, static_cast<size_t>(std::floor(n * val + 1e-9)));
  Splits s;
  for (size_t i = 0; i < n; ++i) {
    CallEdgeSet& part = i < n_train ? s.train : i < n_train + n_val ? s.val : s.test;
    part.add(list[i]);
  }
  if (n >= 10 && (s.train.empty() || s.val.empty() || s.test.empty()))
    throw_usage("split ratios leave a part empty for " + std::to_string(n) +
                " edges");
  return s;
}

size_t pessimistic_rank(const std::vector<double>& scores, size_t true_index) {
  const double t = scores.at(true_index);
  size_t r = 0;
  for (size_t c = 0; c < scores.size(); ++c) {
    if (scores[c] > t || (c != true_index && scores[c] == t)) ++r;
  }
  return r;
}

size_t optimistic_rank(const std::vector<double>& scores, size_t true_index) {
  const double t = scores.at(true_index);
  size_t r = 0;
  for (double s : scores) r += s > t;
  return r;
}

// ---------------------------------------------------------------------------
// Scoring

namespace {

PairScorer embed(const MessageGraph& mg, const ModelParams& params) {
  const Mat h = forward(mg, encode_nodes(mg, params), params);
  return make_pair_scorer(h, params);
}

}  // namespace

Scorer::Scorer(const ModelParams& params, const ProgramGraph& graph,
               const CallEdgeSet* context_edges)
    : graph_(graph),
      endpoints_(enumerate_endpoints(graph)),
      mg_(build_message_graph(graph, compute_features(graph), context_edges,
                              params)),
      head_(embed(mg_, params)) {
  for (NodeId d : endpoints_.function_defs) def_rows_.push_back(mg_.row(d));
}

std::vector<double> Scorer::scores(NodeId callsite) const {
  if (!graph_.has(callsite) || !js::is_call_site_kind(graph_.node(callsite).kind))
    throw_usage("node " + std::to_string(callsite) + " is not a call site");
  const int32_t cs = mg_.row(callsite);
  Eigen::VectorXd logits(def_rows_.size());
  for (size_t d = 0; d < def_rows_.size(); ++d)
    logits[d] = head_.logit(cs, def_rows_[d]);
  const Eigen::VectorXd p = logits_to_probs(logits);
  return std::vector<double>(p.data(), p.data() + p.size());
}

CandidateRanking Scorer::rank(NodeId callsite, std::optional<NodeId> true_callee,
                              size_t top_k) const {
  const std::vector<double> s = scores(callsite);
  const auto& defs = endpoints_.function_defs;
  CandidateRanking r;
  r.callsite = callsite;
  r.n = defs.size();
  if (true_callee) {
    const auto it = std::find(defs.begin(), defs.end(), *true_callee);
    if (it == defs.end())
      throw_usage("node " + std::to_string(*true_callee) +
                  " is not a function definition of the graph");
    r.true_callee = true_callee;
    r.rank = pessimistic_rank(s, static_cast<size_t>(it - defs.begin()));
  }
  std::vector<size_t> order(defs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  const size_t keep = top_k == 0 ? order.size() : std::min(top_k, order.size());
  // Descending score, ascending id among ties.
  std::partial_sort(order.begin(), order.begin() + keep, order.end(),
                    [&](size_t a, size_t b) {
                      if (s[a] != s[b]) return s[a] > s[b];
                      return defs[a] < defs[b];
                    });
  for (size_t i = 0; i < keep; ++i) r.candidates.push_back({defs[order[i]], s[order[i]]});
  return r;
}

CandidateRanking rank_callsite(const ModelParams& params, const ProgramGraph& graph,
                               const CallEdgeSet* context_edges, NodeId callsite,
                               std::optional<NodeId> true_callee, size_t top_k) {
  return Scorer(params, graph, context_edges).rank(callsite, true_callee, top_k);
}

// ---------------------------------------------------------------------------
// Summaries

std::string summary_to_json(const EvalSummary& s) {
  ojson j;
  j["project"] = s.project;
  j["edges"] = s.edges;
  ojson hit = ojson::object();
  for (int k = 1; k <= kMaxK; ++k) hit[std::to_string(k)] = s.hit[k - 1];
  j["hit"] = hit;
  j["mrr"] = s.mrr;
  j["histogram"] = s.histogram;
  ojson cats = ojson::object();
  for (const char* c : kCategories) {
    const auto it = s.categories.find(c);
    const size_t n = it == s.categories.end() ? 0 : it->second.first;
    const size_t r0 = it == s.categories.end() ? 0 : it->second.second;
    cats[c] = {{"edges", n},
               {"rank0", r0},
               {"rank0_share", n ? static_cast<double>(r0) / n : 0.0}};
  }
  j["categories"] = cats;
  j["category_taxonomy"] = "reconstructed";
  j["random_hit1"] = s.random_hit1;
  j["random_hit5"] = s.random_hit5;
  j["runtime_seconds"] = s.runtime_seconds;
  return j.dump();
}

EvalSummary evaluate(const Scorer& scorer, const ProgramGraph& graph,
                     const CallEdgeSet& test_edges, size_t top_k,
                     std::vector<Prediction>* predictions) {
  const auto t0 = std::chrono::steady_clock::now();
  EvalSummary s;
  s.histogram.assign(kMaxK + 1, 0);
  const Categorizer cat(graph);
  std::array<size_t, kMaxK> hits{};
  for (const auto& [key, edge] : test_edges.edges) {
    CandidateRanking r = scorer.rank(key.first, key.second, top_k);
    const size_t rank = *r.rank;
    const std::string label = cat.categorize(edge);
    s.edges++;
    for (int k = 1; k <= kMaxK; ++k) hits[k - 1] += rank < static_cast<size_t>(k);
    s.mrr += 1.0 / (1.0 + static_cast<double>(rank));
    s.histogram[std::min<size_t>(rank, kMaxK)]++;
    auto& c = s.categories[label];
    c.first++;
    c.second += rank == 0;
    const double n = static_cast<double>(r.n);
    s.random_hit1 += std::min(1.0, n) / n;
    s.random_hit5 += std::min(5.0, n) / n;
    if (predictions) predictions->push_back({std::move(r), label});
  }
  if (s.edges) {
    const double n = static_cast<double>(s.edges);
    for (int k = 0; k < kMaxK; ++k) s.hit[k] = hits[k] / n;
    s.mrr /= n;
    s.random_hit1 /= n;
    s.random_hit5 /= n;
  }
  s.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return s;
}

std::string predictions_to_ndjson(const std::vector<Prediction>& preds,
                                  const std::string& meta_json) {
  std::string out = ojson{{"meta", ojson::parse(meta_json)}}.dump() + "\n";
  for (const Prediction& p : preds) {
    ojson j;
    j["callsite"] = p.ranking.callsite;
    ojson cands = ojson::array();
    for (const auto& [id, score] : p.ranking.candidates)
      cands.push_back({{"callee", id}, {"score", score}});
    j["candidates"] = cands;
    j["true_callee"] = p.ranking.true_callee ? ojson(*p.ranking.true_callee) : ojson();
    j["rank"] = p.ranking.rank ? ojson(*p.ranking.rank) : ojson();
    j["category"] = p.category ? ojson(*p.category) : ojson();
    out += j.dump() + "\n";
  }
  return out;
}

EvalSummary aggregate_weighted(const std::vector<EvalSummary>& summaries) {
  if (summaries.empty()) throw_usage("aggregate of an empty summary list");
  EvalSummary a;
  a.project = "aggregate";
  a.histogram.assign(kMaxK + 1, 0);
  for (const EvalSummary& s : summaries) a.edges += s.edges;
  if (a.edges == 0) return a;
  for (const EvalSummary& s : summaries) {
    const double w = static_cast<double>(s.edges) / static_cast<double>(a.edges);
    for (int k = 0; k < kMaxK; ++k) a.hit[k] += w * s.hit[k];
    a.mrr += w * s.mrr;
    a.random_hit1 += w * s.random_hit1;
    a.random_hit5 += w * s.random_hit5;
    a.runtime_seconds += s.runtime_seconds;
    for (size_t b = 0; b < s.histogram.size() && b < a.histogram.size(); ++b)
      a.histogram[b] += s.histogram[b];
    for (const auto& [label, c] : s.categories) {
      a.categories[label].first += c.first;
      a.categories[label].second += c.second;
    }
  }
  return a;
}

RocResult balanced_roc(const std::vector<double>& positive_scores,
                       const std::vector<double>& negative_scores) {
  if (positive_scores.empty() || negative_scores.empty())
    throw_usage("ROC needs positive and negative scores");
  if (positive_scores.size() != negative_scores.size())
    throw_usage("balanced ROC needs equally many positives and negatives");
  std::vector<std::pair<double, bool>> all;
  for (double s : positive_scores) all.push_back({s, true});
  for (double s : negative_scores) all.push_back({s, false});
  std::sort(all.begin(), all.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });
  const double np = static_cast<double>(positive_scores.size());
  const double nn = static_cast<double>(negative_scores.size());
  RocResult r;
  r.points.push_back({0.0, 0.0});
  size_t tp = 0, fp = 0;
  for (size_t i = 0; i < all.size();) {
    // Tied scores move as one threshold step.
    size_t j = i;
    while (j < all.size() && all[j].first == all[i].first) {
      (all[j].second ? tp : fp)++;
      ++j;
    }
    r.points.push_back({fp / nn, tp / np});
    i = j;
  }
  for (size_t i = 1; i < r.points.size(); ++i) {
    const auto& [x0, y0] = r.points[i - 1];
    const auto& [x1, y1] = r.points[i];
    r.auc += (x1 - x0) * (y0 + y1) / 2.0;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Categories

Categorizer::Categorizer(const ProgramGraph& graph)
    : graph_(graph), children_(graph.children_map()), parent_(graph.parent_map()) {}

std::vector<NodeId> Categorizer::params_of(NodeId fn) const {
  const SyntaxNode& n = graph_.node(fn);
  const auto it = children_.find(fn);
  if (it == children_.end()) return {};
  const auto& ch = it->second;
  size_t first = 0;
  if (n.ref_name && n.kind != "ArrowFunctionExpression" && !ch.empty()) {
    const SyntaxNode& c0 = graph_.node(ch[0]);
    if (c0.kind == "Identifier" && c0.name == n.ref_name &&
        ch.size() >= static_cast<size_t>(n.arity) + 2)
      first = 1;
  }
  std::vector<NodeId> out;
  for (size_t i = first; i < ch.size() && i < first + static_cast<size_t>(n.arity); ++i)
    out.push_back(ch[i]);
  return out;
}

bool Categorizer::is_param_of_enclosing(NodeId call, const std::string& name) const {
  for (auto it = parent_.find(call); it != parent_.end(); it = parent_.find(it->second)) {
    const NodeId anc = it->second;
    if (!js::is_function_kind(graph_.node(anc).kind)) continue;
    for (NodeId p : params_of(anc)) {
      NodeId target = p;
      const SyntaxNode& pn = graph_.node(p);
      if (pn.kind == "AssignmentPattern") {
        const auto c = children_.find(p);
        if (c == children_.end() || c->second.empty()) continue;
        target = c->second[0];
      }
      const SyntaxNode& tn = graph_.node(target);
      if (tn.kind == "Identifier" && tn.name == name) return true;
    }
  }
  return false;
}

std::string Categorizer::categorize(const CallEdge& edge) const {
  const SyntaxNode& call = graph_.node(edge.callsite);
  const SyntaxNode& def = graph_.node(edge.callee);
  std::optional<NodeId> callee_expr;
  if (const auto it = children_.find(edge.callsite);
      it != children_.end() && !it->second.empty())
    callee_expr = it->second[0];

  if (callee_expr) {
    const SyntaxNode& ce = graph_.node(*callee_expr);
    if (ce.kind == "MemberExpression" && !ce.computed) {
      const auto& mc = children_.at(*callee_expr);
      if (mc.size() == 2) {
        const auto& prop = graph_.node(mc[1]).name;
        if (prop == "apply" || prop == "call") return "indirect_apply_call";
      }
    }
  }

  if (const auto it = parent_.find(edge.callee); it != parent_.end()) {
    const SyntaxNode& p = graph_.node(it->second);
    if (p.kind == "ReturnStatement") return "higher_order";
    if (js::is_call_site_kind(p.kind)) {
      const auto& pc = children_.at(it->second);
      if (!pc.empty() && pc[0] != edge.callee) return "higher_order";
    }
  }
  if (callee_expr) {
    const SyntaxNode& ce = graph_.node(*callee_expr);
    if (ce.kind == "Identifier" && ce.name &&
        is_param_of_enclosing(edge.callsite, *ce.name))
      return "higher_order";
  }

  if (!def.ref_name) return "anonymous_callee";
  if (call.file != def.file) {
    return graph_.feature_name(edge.callsite) == def.ref_name ? "cross_file_same_name"
                                                             : "cross_file_diff_name";
  }
  return "same_file_direct";
}

std::string categorize_edge(const ProgramGraph& graph, const CallEdge& edge) {
  return Categorizer(graph).categorize(edge);
}

// ---------------------------------------------------------------------------
// Transfer

std::vector<NodeId> layout_offsets(const std::vector<const ProgramGraph*>& graphs) {
  std::vector<NodeId> out;
  uint64_t next = 1;
  for (const ProgramGraph* g : graphs) {
    out.push_back(static_cast<NodeId>(next));
    next += static_cast<uint64_t>(g->max_id()) + 1;
    if (next > UINT32_MAX) throw_data("combined graphs exceed the id space");
  }
  return out;
}

ProgramGraph concat_graphs(const std::vector<const ProgramGraph*>& graphs,
                           const std::vector<std::string>& names,
                           const std::vector<NodeId>& offsets) {
  if (graphs.size() != names.size() || graphs.size() != offsets.size())
    throw_usage("concat_graphs: mismatched argument lengths");
  ProgramGraph out;
  out.root = 0;
  SyntaxNode root;
  root.id = 0;
  root.kind = "Project";
  out.nodes.push_back(root);
  std::set<std::string> prune_kinds;
  for (size_t i = 0; i < graphs.size(); ++i) {
    const ProgramGraph& g = *graphs[i];
    const NodeId off = offsets[i];
    const int file_base = static_cast<int>(out.files.size());
    for (const std::string& f : g.files) out.files.push_back(names[i] + "/" + f);
    for (SyntaxNode n : g.nodes) {
      n.id += off;
      if (n.file >= 0) n.file += file_base;
      out.nodes.push_back(std::move(n));
    }
    for (Edge e : g.edges) {
      e.src += off;
      e.dst += off;
      out.edges.push_back(e);
    }
    out.edges.push_back({0, g.root + off, EdgeType::kAst});
    out.edges.push_back({g.root + off, 0, EdgeType::kAstRev});
    prune_kinds.insert(g.meta.prune_kinds.begin(), g.meta.prune_kinds.end());
    for (const auto& [f, d] : g.meta.input_digests)
      out.meta.input_digests[names[i] + "/" + f] = d;
  }
  if (!graphs.empty()) out.meta.seed = graphs[0]->meta.seed;
  out.meta.prune_kinds.assign(prune_kinds.begin(), prune_kinds.end());
  std::sort(out.nodes.begin(), out.nodes.end(),
            [](const SyntaxNode& a, const SyntaxNode& b) { return a.id < b.id; });
  out.reindex();
  sort_edges(out);
  return out;
}

CallEdgeSet shift_edges(const CallEdgeSet& edges, NodeId offset) {
  CallEdgeSet out;
  for (const auto& [key, e] : edges.edges) {
    CallEdge s = e;
    s.callsite += offset;
    s.callee += offset;
    out.add(s);
  }
  return out;
}

std::vector<FoldResult> transfer_eval(const std::vector<TransferProject>& projects,
                                      const Hyperparams& hp) {
  if (projects.size() < 2) throw_usage("transfer needs at least two projects");
  std::vector<const ProgramGraph*> all;
  for (const TransferProject& p : projects) all.push_back(&p.graph);
  const std::vector<NodeId> offsets = layout_offsets(all);

  std::vector<FoldResult> folds;
  for (size_t k = 0; k < projects.size(); ++k) {
    std::vector<const ProgramGraph*> graphs;
    std::vector<std::string> names;
    std::vector<NodeId> offs;
    std::vector<CallEdgeSet> edge_sets;
    for (size_t i = 0; i < projects.size(); ++i) {
      if (i == k) continue;
      graphs.push_back(&projects[i].graph);
      names.push_back(projects[i].name);
      offs.push_back(offsets[i]);
      edge_sets.push_back(shift_edges(projects[i].edges, offsets[i]));
    }
    const ProgramGraph train_graph = concat_graphs(graphs, names, offs);
    const CallEdgeSet train_edges = merge_edge_sets(train_graph, edge_sets);

    FoldResult fold;
    fold.held_out = projects[k].name;
    fold.held_out_ids = {offsets[k], offsets[k] + projects[k].graph.max_id()};
    fold.training_nodes = train_graph.nodes.size();
    for (const SyntaxNode& n : train_graph.nodes) {
      if (n.id >= fold.held_out_ids.first && n.id <= fold.held_out_ids.second)
        throw_data("held-out project " + fold.held_out +
                   " overlaps the training graph at node " + std::to_string(n.id));
    }

    TrainResult tr = train(train_graph, compute_features(train_graph), train_edges, hp);
    fold.report = tr.report;

    const Splits held = split_edges(projects[k].edges, hp.split_train, hp.split_val,
                                    hp.split_test, hp.seed);
    const Scorer scorer(tr.params, projects[k].graph, &held.train);
    fold.summary = evaluate(scorer, projects[k].graph, held.test);
    fold.summary.project = projects[k].name;
    folds.push_back(std::move(fold));
  }
  return folds;
}

}  // namespace cgnn
