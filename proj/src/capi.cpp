#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>

#include "cgnn.h"
#include "cgnn/error.hpp"
#include "cgnn/evaluation.hpp"
#include "cgnn/instrument.hpp"
#include "cgnn/js/ast.hpp"
#include "cgnn/train.hpp"
#include "cgnn/triage.hpp"
#include "cgnn/util.hpp"
#include "json.hpp"

using nlohmann::json;
using ojson = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct cgnn_graph {
  cgnn::ProgramGraph g;
};
struct cgnn_edges {
  cgnn::CallEdgeSet e;
};
struct cgnn_model {
  const cgnn::ProgramGraph* graph = nullptr;
  std::shared_ptr<const cgnn::ModelParams> params;
  cgnn::Splits splits;
  std::unique_ptr<cgnn::Scorer> scorer;
  std::string sidecar;
};
struct cgnn_service {
  std::unique_ptr<cgnn::TriageService> svc;
};

namespace {

thread_local std::string g_last_error;

template <typename F>
cgnn_status guard(F&& f) {
  g_last_error.clear();
  try {
    f();
    return CGNN_OK;
  } catch (const cgnn::Error& e) {
    g_last_error = e.what();
    return static_cast<cgnn_status>(static_cast<int>(e.kind()));
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid JSON: ") + e.what();
    return CGNN_E_USAGE;
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return CGNN_E_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return CGNN_E_INTERNAL;
  }
}

char* dup(const std::string& s) {
  char* p = static_cast<char*>(std::malloc(s.size() + 1));
  if (!p) throw std::bad_alloc();
  std::memcpy(p, s.c_str(), s.size() + 1);
  return p;
}

void set_out(char** out, const std::string& s) {
  if (out) *out = dup(s);
}

void require(const void* p, const char* what) {
  if (!p) cgnn::throw_usage(std::string(what) + " must not be null");
}

json parse_object(const char* text, const char* what) {
  if (!text || !*text) return json::object();
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    cgnn::throw_usage(std::string(what) + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) cgnn::throw_usage(std::string(what) + " must be a JSON object");
  return j;
}

cgnn::ParseOptions parse_options(const json& o) {
  static const char* kKeys[] = {"include", "exclude", "prune_kinds", "semantic", "seed"};
  for (const auto& [k, v] : o.items()) {
    if (std::find_if(std::begin(kKeys), std::end(kKeys),
                     [&](const char* x) { return k == x; }) == std::end(kKeys))
      cgnn::throw_usage("unknown option " + k);
  }
  cgnn::ParseOptions p;
  if (o.contains("include")) p.include_globs = o["include"].get<std::vector<std::string>>();
  if (o.contains("exclude")) p.exclude_globs = o["exclude"].get<std::vector<std::string>>();
  p.seed = o.value("seed", uint64_t{0});
  return p;
}

ojson diagnostics_json(const std::vector<cgnn::Diagnostic>& d) {
  ojson a = ojson::array();
  for (const auto& x : d) a.push_back({{"where", x.where}, {"message", x.message}});
  return a;
}

std::string graph_digest(const cgnn::ProgramGraph& g) {
  return cgnn::hex_digest(cgnn::graph_to_json(g));
}

cgnn::CallEdgeSet load_edges_strict(const cgnn::ProgramGraph& g, const std::string& path) {
  const cgnn::EdgeFile f = cgnn::read_edge_file(path);
  cgnn::IngestResult r = cgnn::ingest_static_edges(f, g);
  if (r.unresolved > 0)
    cgnn::throw_data(path + ": " + std::to_string(r.unresolved) +
                     " records do not resolve against the graph (" +
                     r.diagnostics.front().where + ": " + r.diagnostics.front().message + ")");
  return std::move(r.edges);
}

std::string edges_meta(const std::string& meta_json) {
  return meta_json.empty() ? ojson{{"tool_version", cgnn::kToolVersion}}.dump()
                           : parse_object(meta_json.c_str(), "meta").dump();
}

// Timing fields vary between runs; output files leave them out so reruns are
// byte-identical.
ojson strip_timing(ojson j) {
  if (j.is_object()) {
    j.erase("runtime_seconds");
    j.erase("wall_seconds");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

}  // namespace

extern "C" {

const char* cgnn_version(void) { return cgnn::kToolVersion; }

const char* cgnn_last_error(void) { return g_last_error.c_str(); }

void cgnn_string_free(char* s) { std::free(s); }

cgnn_status cgnn_file_digest(const char* path, char** digest) {
  return guard([&] {
    require(path, "path");
    set_out(digest, cgnn::file_digest(path));
  });
}

// ---------------------------------------------------------------------------
// Graphs

cgnn_status cgnn_graph_build(const char* project_dir, const char* options_json,
                             cgnn_graph** out, char** report_json) {
  return guard([&] {
    require(project_dir, "project_dir");
    require(out, "out");
    const json o = parse_object(options_json, "options");
    const cgnn::ParseOptions po = parse_options(o);
    std::set<std::string> kinds(cgnn::default_prune_kinds().begin(),
                                cgnn::default_prune_kinds().end());
    if (o.contains("prune_kinds")) {
      const auto v = o["prune_kinds"].get<std::vector<std::string>>();
      kinds = std::set<std::string>(v.begin(), v.end());
    }
    for (const std::string& k : kinds)
      if (cgnn::is_protected_kind(k)) cgnn::throw_usage("kind " + k + " cannot be pruned");
    cgnn::ParseResult r = cgnn::parse_project(project_dir, po);
    cgnn::ProgramGraph g = cgnn::prune(r.graph, kinds);
    if (o.value("semantic", true)) g = cgnn::link_identifiers(g);
    g.meta.project_dir = project_dir;
    const auto problems = cgnn::validate_graph(g);
    if (!problems.empty()) cgnn::throw_data("built graph is inconsistent: " + problems.front());
    if (report_json) {
      ojson rep;
      rep["files"] = g.files.size();
      rep["nodes"] = g.nodes.size();
      ojson by_type;
      for (int t = 0; t < cgnn::kNumEdgeTypes; ++t) {
        const auto et = static_cast<cgnn::EdgeType>(t);
        by_type[std::string(cgnn::edge_type_name(et))] = g.count_edges(et);
      }
      rep["edges"] = by_type;
      const cgnn::Endpoints ep = cgnn::enumerate_endpoints(g);
      rep["call_sites"] = ep.call_sites.size();
      rep["function_defs"] = ep.function_defs.size();
      rep["diagnostics"] = diagnostics_json(r.diagnostics);
      *report_json = dup(rep.dump());
    }
    *out = new cgnn_graph{std::move(g)};
  });
}

cgnn_status cgnn_graph_load(const char* path, cgnn_graph** out) {
  return guard([&] {
    require(path, "path");
    require(out, "out");
    *out = new cgnn_graph{cgnn::load_graph(path)};
  });
}

cgnn_status cgnn_graph_save(const cgnn_graph* g, const char* path) {
  return guard([&] {
    require(g, "graph");
    require(path, "path");
    cgnn::save_graph(g->g, path);
  });
}

cgnn_status cgnn_graph_stats(const cgnn_graph* g, char** out) {
  return guard([&] {
    require(g, "graph");
    ojson j;
    j["files"] = g->g.files.size();
    j["nodes"] = g->g.nodes.size();
    j["edges"] = g->g.edges.size();
    const cgnn::Endpoints ep = cgnn::enumerate_endpoints(g->g);
    j["call_sites"] = ep.call_sites.size();
    j["function_defs"] = ep.function_defs.size();
    j["digest"] = graph_digest(g->g);
    j["seed"] = g->g.meta.seed;
    j["project_dir"] = g->g.meta.project_dir;
    set_out(out, j.dump());
  });
}

cgnn_status cgnn_graph_digest(const cgnn_graph* g, char** digest) {
  return guard([&] {
    require(g, "graph");
    set_out(digest, graph_digest(g->g));
  });
}

cgnn_status cgnn_graph_find_callsite(const cgnn_graph* g, const char* spec, uint32_t* id) {
  return guard([&] {
    require(g, "graph");
    require(spec, "spec");
    require(id, "id");
    const std::string s = spec;
    // File names may contain ':', so split from the right.
    std::vector<std::string> nums;
    std::string file = s;
    for (int i = 0; i < 2; ++i) {
      const size_t c = file.rfind(':');
      if (c == std::string::npos) break;
      const std::string tail = file.substr(c + 1);
      if (tail.empty() || tail.find_first_not_of("0123456789") != std::string::npos) break;
      nums.insert(nums.begin(), tail);
      file = file.substr(0, c);
    }
    if (nums.empty() || file.empty())
      cgnn::throw_usage("call site must be FILE:START or FILE:START:END, got " + s);
    const unsigned long long start = std::stoull(nums[0]);
    const bool has_end = nums.size() > 1;
    const unsigned long long end = has_end ? std::stoull(nums[1]) : 0;
    const cgnn::ProgramGraph& pg = g->g;
    std::optional<cgnn::NodeId> best;
    for (cgnn::NodeId cs : cgnn::enumerate_endpoints(pg).call_sites) {
      const cgnn::SyntaxNode& n = pg.node(cs);
      if (n.file < 0 || pg.files[n.file] != file || n.start != start) continue;
      if (has_end && n.end != end) continue;
      if (!best || n.end < pg.node(*best).end) best = cs;
    }
    if (!best) cgnn::throw_not_found("no call site at " + s);
    *id = *best;
  });
}

void cgnn_graph_free(cgnn_graph* g) { delete g; }

// ---------------------------------------------------------------------------
// Edges

cgnn_status cgnn_edges_ingest(const cgnn_graph* g, const char* path, cgnn_edges** out,
                              char** report_json) {
  return guard([&] {
    require(g, "graph");
    require(path, "path");
    require(out, "out");
    cgnn::IngestResult r = cgnn::ingest_static_edges(cgnn::read_edge_file(path), g->g);
    if (report_json) {
      ojson rep;
      rep["records"] = r.records;
      rep["unresolved"] = r.unresolved;
      rep["edges"] = r.edges.size();
      rep["diagnostics"] = diagnostics_json(r.diagnostics);
      *report_json = dup(rep.dump());
    }
    *out = new cgnn_edges{std::move(r.edges)};
  });
}

cgnn_status cgnn_edges_load(const cgnn_graph* g, const char* path, cgnn_edges** out) {
  return guard([&] {
    require(g, "graph");
    require(path, "path");
    require(out, "out");
    *out = new cgnn_edges{load_edges_strict(g->g, path)};
  });
}

cgnn_status cgnn_edges_heuristic(const cgnn_graph* g, cgnn_edges** out) {
  return guard([&] {
    require(g, "graph");
    require(out, "out");
    *out = new cgnn_edges{cgnn::heuristic_static_resolve(g->g)};
  });
}

cgnn_status cgnn_edges_merge(const cgnn_graph* g, const cgnn_edges* const* sets, size_t n,
                             cgnn_edges** out) {
  return guard([&] {
    require(g, "graph");
    require(out, "out");
    if (n) require(sets, "sets");
    std::vector<cgnn::CallEdgeSet> v;
    for (size_t i = 0; i < n; ++i) {
      require(sets[i], "edge set");
      v.push_back(sets[i]->e);
    }
    *out = new cgnn_edges{cgnn::merge_edge_sets(g->g, v)};
  });
}

cgnn_status cgnn_edges_save(const cgnn_graph* g, const cgnn_edges* e, const char* path,
                            const char* meta_json) {
  return guard([&] {
    require(g, "graph");
    require(e, "edges");
    require(path, "path");
    cgnn::write_file(path, cgnn::edges_to_ndjson(g->g, e->e,
                                                 edges_meta(meta_json ? meta_json : "")));
  });
}

size_t cgnn_edges_count(const cgnn_edges* e) { return e ? e->e.size() : 0; }

void cgnn_edges_free(cgnn_edges* e) { delete e; }

// ---------------------------------------------------------------------------
// Dynamic ground truth

cgnn_status cgnn_instrument(const char* project_dir, const char* out_dir,
                            const char* options_json, char** report_json) {
  return guard([&] {
    require(project_dir, "project_dir");
    require(out_dir, "out_dir");
    json o = parse_object(options_json, "options");
    o.erase("prune_kinds");
    o.erase("semantic");
    const cgnn::InstrumentResult r =
        cgnn::instrument_project(project_dir, out_dir, parse_options(o));
    ojson rep;
    rep["files_instrumented"] = r.files_instrumented;
    rep["functions_instrumented"] = r.functions_instrumented;
    rep["sites"] = r.site_map.size();
    rep["site_map"] = (fs::path(out_dir) / cgnn::kSiteMapFile).string();
    rep["shim"] = (fs::path(out_dir) / cgnn::kShimFile).string();
    rep["diagnostics"] = diagnostics_json(r.diagnostics);
    set_out(report_json, rep.dump());
  });
}

cgnn_status cgnn_trace_parse(const cgnn_graph* g, const char* trace_path,
                             const char* sitemap_path, const char* source_root,
                             cgnn_edges** out, char** report_json) {
  return guard([&] {
    require(g, "graph");
    require(trace_path, "trace_path");
    require(sitemap_path, "sitemap_path");
    require(out, "out");
    const cgnn::SiteMap sm = cgnn::site_map_from_json(cgnn::read_file(sitemap_path));
    const std::string root = source_root ? source_root : g->g.meta.project_dir;
    cgnn::TraceParseResult r =
        cgnn::parse_traces(cgnn::read_file(trace_path), sm, g->g, root);
    ojson rep;
    rep["events"] = r.events;
    rep["edges"] = r.edges.size();
    rep["native_dropped"] = r.native_dropped;
    rep["external_dropped"] = r.external_dropped;
    rep["unmapped"] = r.unmapped;
    rep["diagnostics"] = diagnostics_json(r.diagnostics);
    set_out(report_json, rep.dump());
    *out = new cgnn_edges{std::move(r.edges)};
  });
}

// ---------------------------------------------------------------------------
// Model

cgnn_status cgnn_train(const cgnn_graph* g, const cgnn_edges* positives,
                       const char* hyperparams_json, const char* checkpoint_path,
                       const char* meta_json, cgnn_epoch_callback cb, void* user,
                       char** report_json) {
  return guard([&] {
    require(g, "graph");
    require(positives, "positives");
    require(checkpoint_path, "checkpoint_path");
    const cgnn::Hyperparams hp = cgnn::hyperparams_from_json(
        hyperparams_json && *hyperparams_json ? hyperparams_json : "{}");
    cgnn::EpochCallback on_epoch;
    if (cb) {
      on_epoch = [&](const cgnn::EpochLog& l) {
        const ojson j{{"epoch", l.epoch},       {"loss", l.loss},
                      {"val_loss", l.val_loss}, {"val_hit5", l.val_hit5},
                      {"val_mrr", l.val_mrr},   {"lr", l.lr}};
        cb(j.dump().c_str(), user);
      };
    }
    const cgnn::TrainResult tr =
        cgnn::train(g->g, cgnn::compute_features(g->g), positives->e, hp, on_epoch);

    const std::string meta = edges_meta(meta_json ? meta_json : "");
    const std::string base = checkpoint_path;
    const std::pair<const char*, const cgnn::CallEdgeSet*> parts[] = {
        {"train", &tr.splits.train}, {"val", &tr.splits.val}, {"test", &tr.splits.test}};
    ojson split_files;
    for (const auto& [name, set] : parts) {
      const std::string p = base + "." + name + ".jsonl";
      cgnn::write_file(p, cgnn::edges_to_ndjson(g->g, *set, meta));
      split_files[name] = fs::path(p).filename().string();
    }
    const ojson report = ojson::parse(cgnn::train_report_to_json(tr.report));
    ojson metrics;
    metrics["best_epoch"] = report["best_epoch"];
    metrics["best_val_hit5"] = report["best_val_hit5"];
    metrics["best_val_mrr"] = report["best_val_mrr"];
    metrics["stop_reason"] = report["stop_reason"];
    metrics["epochs_run"] = report["epochs_run"];
    ojson extra;
    extra["input_digests"] = parse_object(meta.c_str(), "meta").value("input_digests", json::object());
    extra["graph_digest"] = graph_digest(g->g);
    extra["splits"] = split_files;
    extra["split_sizes"] = {{"train", tr.splits.train.size()},
                            {"val", tr.splits.val.size()},
                            {"test", tr.splits.test.size()}};
    extra["message_graph"] = {{"edges", tr.report.message_edges},
                              {"call_msg_edges", tr.report.call_msg_edges},
                              {"call_edges_in_messages", "train_split"},
                              {"oov_kinds", tr.report.oov_kinds}};
    extra["train_report"] = strip_timing(report);
    cgnn::save_checkpoint(base, tr.params, metrics.dump(), extra.dump());
    set_out(report_json, report.dump());
  });
}

cgnn_status cgnn_model_load(const char* checkpoint_path, const cgnn_graph* g,
                            cgnn_model** out) {
  return guard([&] {
    require(checkpoint_path, "checkpoint_path");
    require(g, "graph");
    require(out, "out");
    auto m = std::make_unique<cgnn_model>();
    m->graph = &g->g;
    m->params = std::make_shared<cgnn::ModelParams>(
        cgnn::load_checkpoint(checkpoint_path, &m->sidecar));
    const json side = json::parse(m->sidecar);
    if (side.contains("graph_digest") &&
        side["graph_digest"].get<std::string>() != graph_digest(g->g))
      cgnn::throw_data("checkpoint was trained on a different graph");
    if (side.contains("splits")) {
      const fs::path dir = fs::path(checkpoint_path).parent_path();
      const auto& s = side["splits"];
      m->splits.train = load_edges_strict(g->g, (dir / s.at("train").get<std::string>()).string());
      m->splits.val = load_edges_strict(g->g, (dir / s.at("val").get<std::string>()).string());
      m->splits.test = load_edges_strict(g->g, (dir / s.at("test").get<std::string>()).string());
    }
    m->scorer = std::make_unique<cgnn::Scorer>(*m->params, g->g, &m->splits.train);
    *out = m.release();
  });
}

void cgnn_model_free(cgnn_model* m) { delete m; }

cgnn_status cgnn_rank(const cgnn_model* m, uint32_t callsite, size_t k, char** out) {
  return guard([&] {
    require(m, "model");
    const cgnn::ProgramGraph& g = *m->graph;
    if (!g.has(callsite) || !cgnn::js::is_call_site_kind(g.node(callsite).kind))
      cgnn::throw_not_found("unknown call site " + std::to_string(callsite));
    const cgnn::CandidateRanking r = m->scorer->rank(callsite, std::nullopt, k);
    const auto span = [&](cgnn::NodeId id) {
      const cgnn::SyntaxNode& n = g.node(id);
      return ojson{{"file", n.file >= 0 ? g.files[n.file] : ""},
                   {"start", n.start},
                   {"end", n.end}};
    };
    ojson j;
    j["callsite"] = callsite;
    j["span"] = span(callsite);
    j["n"] = r.n;
    ojson cands = ojson::array();
    for (const auto& [id, score] : r.candidates) {
      const cgnn::SyntaxNode& n = g.node(id);
      cands.push_back({{"callee", id},
                       {"score", score},
                       {"name", n.ref_name ? ojson(*n.ref_name) : ojson()},
                       {"span", span(id)}});
    }
    j["candidates"] = cands;
    set_out(out, j.dump());
  });
}

cgnn_status cgnn_evaluate(const cgnn_model* m, const cgnn_edges* test, size_t k,
                          const char* predictions_path, const char* meta_json,
                          char** summary_json) {
  return guard([&] {
    require(m, "model");
    const cgnn::CallEdgeSet& t = test ? test->e : m->splits.test;
    for (const auto& [key, e] : t.edges) {
      if (m->splits.train.contains(key.first, key.second))
        cgnn::throw_data("test edge " + std::to_string(key.first) + "->" +
                         std::to_string(key.second) + " is part of the training split");
    }
    std::vector<cgnn::Prediction> preds;
    cgnn::EvalSummary s =
        cgnn::evaluate(*m->scorer, *m->graph, t, k, predictions_path ? &preds : nullptr);
    s.project = m->graph->meta.project_dir;
    const std::string meta = edges_meta(meta_json ? meta_json : "");
    if (predictions_path)
      cgnn::write_file(predictions_path, cgnn::predictions_to_ndjson(preds, meta));
    ojson j;
    j["meta"] = ojson::parse(meta);
    const ojson sj = ojson::parse(cgnn::summary_to_json(s));
    for (const auto& [key, v] : sj.items()) j[key] = v;
    set_out(summary_json, j.dump());
  });
}

cgnn_status cgnn_categorize(const cgnn_graph* g, const cgnn_edges* e, char** out) {
  return guard([&] {
    require(g, "graph");
    require(e, "edges");
    const cgnn::Categorizer cat(g->g);
    ojson counts = ojson::object();
    for (const char* c : cgnn::kCategories) counts[c] = 0;
    ojson edges = ojson::array();
    for (const auto& [key, edge] : e->e.edges) {
      const std::string label = cat.categorize(edge);
      counts[label] = counts[label].get<size_t>() + 1;
      edges.push_back({{"callsite", key.first}, {"callee", key.second}, {"category", label}});
    }
    ojson j;
    j["category_taxonomy"] = "reconstructed";
    j["counts"] = counts;
    j["edges"] = edges;
    set_out(out, j.dump());
  });
}

cgnn_status cgnn_transfer(const char* manifest_path, const char* hyperparams_json,
                          char** report_json) {
  return guard([&] {
    require(manifest_path, "manifest_path");
    const json man = parse_object(cgnn::read_file(manifest_path).c_str(), "manifest");
    const fs::path dir = fs::path(manifest_path).parent_path();
    json hpj = man.value("hyperparams", json::object());
    const json overrides = parse_object(hyperparams_json, "hyperparams");
    for (const auto& [k, v] : overrides.items()) hpj[k] = v;
    const cgnn::Hyperparams hp = cgnn::hyperparams_from_json(hpj.dump());
    if (!man.contains("projects") || !man["projects"].is_array())
      cgnn::throw_usage("manifest needs a projects array");
    std::vector<cgnn::TransferProject> projects;
    for (const auto& p : man["projects"]) {
      cgnn::TransferProject tp;
      tp.name = p.at("name").get<std::string>();
      tp.graph = cgnn::load_graph((dir / p.at("graph").get<std::string>()).string());
      tp.edges = load_edges_strict(tp.graph, (dir / p.at("edges").get<std::string>()).string());
      projects.push_back(std::move(tp));
    }
    const std::vector<cgnn::FoldResult> folds = cgnn::transfer_eval(projects, hp);
    ojson j;
    ojson fj = ojson::array();
    std::vector<cgnn::EvalSummary> sums;
    for (const cgnn::FoldResult& f : folds) {
      fj.push_back({{"held_out", f.held_out},
                    {"held_out_ids", {f.held_out_ids.first, f.held_out_ids.second}},
                    {"training_nodes", f.training_nodes},
                    {"disjoint", true},
                    {"summary", ojson::parse(cgnn::summary_to_json(f.summary))},
                    {"train", ojson::parse(cgnn::train_report_to_json(f.report))}});
      sums.push_back(f.summary);
    }
    j["folds"] = fj;
    j["aggregate"] = ojson::parse(cgnn::summary_to_json(cgnn::aggregate_weighted(sums)));
    set_out(report_json, j.dump());
  });
}

// ---------------------------------------------------------------------------
// Triage

cgnn_status cgnn_service_open(const cgnn_graph* g, const cgnn_edges* static_edges,
                              const cgnn_model* m, const char* log_path,
                              cgnn_service** out) {
  return guard([&] {
    require(g, "graph");
    require(static_edges, "static_edges");
    require(log_path, "log_path");
    require(out, "out");
    if (m && m->graph != &g->g)
      cgnn::throw_usage("model was loaded against a different graph handle");
    auto s = std::make_unique<cgnn_service>();
    s->svc = std::make_unique<cgnn::TriageService>(
        g->g, static_edges->e, m ? m->params : nullptr,
        m ? m->splits.train : cgnn::CallEdgeSet{}, log_path);
    *out = s.release();
  });
}

cgnn_status cgnn_service_unresolved(cgnn_service* s, char** out) {
  return guard([&] {
    require(s, "service");
    set_out(out, s->svc->unresolved_json());
  });
}

cgnn_status cgnn_service_candidates(cgnn_service* s, uint32_t callsite, size_t k,
                                    char** out) {
  return guard([&] {
    require(s, "service");
    set_out(out, s->svc->candidates_json(callsite, k));
  });
}

cgnn_status cgnn_service_decide(cgnn_service* s, const char* decision_json, char** out) {
  return guard([&] {
    require(s, "service");
    require(decision_json, "decision_json");
    const cgnn::TriageDecision d =
        s->svc->record_decision(cgnn::decision_from_json(decision_json));
    set_out(out, cgnn::decision_to_json(d));
  });
}

cgnn_status cgnn_service_export(cgnn_service* s, char** out) {
  return guard([&] {
    require(s, "service");
    set_out(out, s->svc->export_json());
  });
}

cgnn_status cgnn_service_serve(cgnn_service* s, const char* host, int port,
                               const char* ui_dir, void (*ready)(int, void*), void* user) {
  return guard([&] {
    require(s, "service");
    if (port < 0 || port > 65535) cgnn::throw_usage("port out of range");
    cgnn::TriageHttpServer server(*s->svc, ui_dir ? ui_dir : "");
    const int bound = server.bind(host ? host : "127.0.0.1", port);
    if (ready) ready(bound, user);
    server.listen();
  });
}

void cgnn_service_free(cgnn_service* s) { delete s; }

}  // extern "C"
