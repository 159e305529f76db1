#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cgnn.h"
#include "json.hpp"

namespace {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct CliError {
  int code;
  std::string kind;
  std::string message;
};

[[noreturn]] void usage_error(const std::string& msg) {
  throw CliError{kExitUsage, "usage", msg};
}

void check(cgnn_status st) {
  if (st == CGNN_OK) return;
  const std::string msg = cgnn_last_error();
  switch (st) {
    case CGNN_E_USAGE: throw CliError{kExitUsage, "usage", msg};
    case CGNN_E_NOT_FOUND: throw CliError{kExitUsage, "not_found", msg};
    case CGNN_E_IO: throw CliError{kExitData, "io", msg};
    case CGNN_E_DATA: throw CliError{kExitData, "data", msg};
    default: throw CliError{kExitData, "internal", msg};
  }
}

std::string take(char* s) {
  std::string out = s ? s : "";
  cgnn_string_free(s);
  return out;
}

struct GraphDel { void operator()(cgnn_graph* p) const { cgnn_graph_free(p); } };
struct EdgesDel { void operator()(cgnn_edges* p) const { cgnn_edges_free(p); } };
struct ModelDel { void operator()(cgnn_model* p) const { cgnn_model_free(p); } };
struct ServiceDel { void operator()(cgnn_service* p) const { cgnn_service_free(p); } };
using Graph = std::unique_ptr<cgnn_graph, GraphDel>;
using Edges = std::unique_ptr<cgnn_edges, EdgesDel>;
using Model = std::unique_ptr<cgnn_model, ModelDel>;
using Service = std::unique_ptr<cgnn_service, ServiceDel>;

Graph load_graph(const std::string& path) {
  cgnn_graph* g = nullptr;
  check(cgnn_graph_load(path.c_str(), &g));
  return Graph(g);
}

Edges load_edges(const cgnn_graph* g, const std::string& path) {
  cgnn_edges* e = nullptr;
  check(cgnn_edges_load(g, path.c_str(), &e));
  return Edges(e);
}

Edges load_merged(const cgnn_graph* g, const std::vector<std::string>& paths) {
  std::vector<Edges> sets;
  std::vector<const cgnn_edges*> raw;
  for (const std::string& p : paths) {
    sets.push_back(load_edges(g, p));
    raw.push_back(sets.back().get());
  }
  cgnn_edges* e = nullptr;
  check(cgnn_edges_merge(g, raw.data(), raw.size(), &e));
  return Edges(e);
}

Model load_model(const std::string& path, const cgnn_graph* g) {
  cgnn_model* m = nullptr;
  check(cgnn_model_load(path.c_str(), g, &m));
  return Model(m);
}

json graph_stats(const cgnn_graph* g) {
  char* s = nullptr;
  check(cgnn_graph_stats(g, &s));
  return json::parse(take(s));
}

std::string digest(const std::string& path) {
  char* s = nullptr;
  check(cgnn_file_digest(path.c_str(), &s));
  return take(s);
}

// {tool_version, seed, input_digests} for an output derived from `inputs`.
json make_meta(uint64_t seed, const std::vector<std::string>& inputs) {
  json d = json::object();
  for (const std::string& p : inputs) d[p] = digest(p);
  return json{{"tool_version", cgnn_version()}, {"seed", seed}, {"input_digests", d}};
}

json strip_timing(json j) {
  if (j.is_object()) {
    j.erase("runtime_seconds");
    j.erase("wall_seconds");
    for (auto& [k, v] : j.items()) v = strip_timing(v);
  } else if (j.is_array()) {
    for (auto& v : j) v = strip_timing(v);
  }
  return j;
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CliError{kExitData, "io", "cannot write " + path};
  out << text;
  if (!out) throw CliError{kExitData, "io", "cannot write " + path};
}

// ---------------------------------------------------------------------------
// Pipeline config

struct Config {
  std::optional<std::string> project_dir;
  std::vector<std::string> include, exclude;
  std::optional<std::vector<std::string>> prune_kinds;
  json hyperparams = json::object();
  std::optional<uint64_t> seed;
  std::map<std::string, std::string> paths;
};

Config load_config(const std::string& path) {
  Config c;
  if (path.empty()) return c;
  std::ifstream in(path);
  if (!in) usage_error("cannot read config " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    usage_error("config " + path + " is not valid JSON: " + e.what());
  }
  if (!j.is_object()) usage_error("config must be a JSON object");
  static const std::set<std::string> kKeys = {"project_dir",  "include_globs", "exclude_globs",
                                              "prune_kinds",  "hyperparams",   "seed",
                                              "paths"};
  static const std::set<std::string> kPaths = {"graph",  "edges",       "checkpoint",
                                               "report", "predictions", "instrumented",
                                               "trace",  "sitemap",     "log"};
  const fs::path base = fs::path(path).parent_path();
  const auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() || base.empty() ? p : (base / p).string();
  };
  try {
    for (const auto& [k, v] : j.items())
      if (!kKeys.count(k)) usage_error("unknown config key " + k);
    if (j.contains("project_dir")) c.project_dir = resolve(j["project_dir"].get<std::string>());
    if (j.contains("include_globs")) c.include = j["include_globs"].get<std::vector<std::string>>();
    if (j.contains("exclude_globs")) c.exclude = j["exclude_globs"].get<std::vector<std::string>>();
    if (j.contains("prune_kinds")) c.prune_kinds = j["prune_kinds"].get<std::vector<std::string>>();
    if (j.contains("hyperparams")) c.hyperparams = j["hyperparams"];
    if (j.contains("seed")) c.seed = j["seed"].get<uint64_t>();
    if (j.contains("paths")) {
      for (const auto& [k, v] : j["paths"].items()) {
        if (!kPaths.count(k)) usage_error("unknown config path " + k);
        c.paths[k] = resolve(v.get<std::string>());
      }
    }
  } catch (const json::exception& e) {
    usage_error(std::string("malformed config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Options shared by several subcommands

struct Options {
  bool json_out = false;
  std::string config_path;
  Config config;
  std::optional<uint64_t> seed;

  std::string project, out, graph, model, report, predictions, manifest, trace, sitemap,
      source_root, ingest, callsite, test, log, ui, host = "127.0.0.1", hp_file;
  std::vector<std::string> edges, include, exclude, prune_kinds;
  bool heuristic = false, no_semantic = false, progress = false;
  bool no_semantic_edges = false, null_features = false;
  std::optional<int> epochs, hidden, layers, name_buckets, patience;
  std::optional<double> lr;
  std::optional<size_t> batch_size;
  std::optional<std::string> negatives;
  size_t k = 20;
  int port = 8080;

  uint64_t seed_or(uint64_t fallback) const {
    if (seed) return *seed;
    if (config.seed) return *config.seed;
    return fallback;
  }
  std::string path_or(const std::string& flag, const char* key, const char* what) const {
    if (!flag.empty()) return flag;
    const auto it = config.paths.find(key);
    if (it != config.paths.end()) return it->second;
    usage_error(std::string("missing ") + what);
  }
  std::string optional_path(const std::string& flag, const char* key) const {
    if (!flag.empty()) return flag;
    const auto it = config.paths.find(key);
    return it == config.paths.end() ? "" : it->second;
  }
};

json hyperparams(const Options& o) {
  json hp = o.config.hyperparams;
  if (!o.hp_file.empty()) {
    std::ifstream in(o.hp_file);
    if (!in) usage_error("cannot read " + o.hp_file);
    try {
      const json file = json::parse(in);
      for (const auto& [k, v] : file.items()) hp[k] = v;
    } catch (const json::exception& e) {
      usage_error(o.hp_file + " is not valid JSON: " + e.what());
    }
  }
  if (o.epochs) hp["max_epochs"] = *o.epochs;
  if (o.hidden) hp["hidden_dim"] = *o.hidden;
  if (o.layers) hp["layers"] = *o.layers;
  if (o.name_buckets) hp["name_buckets"] = *o.name_buckets;
  if (o.patience) hp["patience"] = *o.patience;
  if (o.lr) hp["lr_init"] = *o.lr;
  if (o.batch_size) hp["batch_size"] = *o.batch_size;
  if (o.negatives) hp["negatives"] = *o.negatives;
  if (o.no_semantic_edges) hp["semantic_edges"] = false;
  if (o.null_features) hp["node_features"] = false;
  if (o.seed) hp["seed"] = *o.seed;
  else if (o.config.seed && !hp.contains("seed")) hp["seed"] = *o.config.seed;
  return hp;
}

void add_hp_flags(CLI::App* sub, Options& o) {
  sub->add_option("--hyperparams", o.hp_file, "JSON file of hyperparameters");
  sub->add_option("--epochs", o.epochs, "Maximum epochs");
  sub->add_option("--hidden", o.hidden, "Hidden dimension");
  sub->add_option("--layers", o.layers, "Message-passing layers");
  sub->add_option("--name-buckets", o.name_buckets, "Hashed name buckets");
  sub->add_option("--patience", o.patience, "Plateau patience in epochs");
  sub->add_option("--lr", o.lr, "Initial learning rate");
  sub->add_option("--batch-size", o.batch_size, "Pairs per batch");
  sub->add_option("--negatives", o.negatives, "uniform or per_callsite");
  sub->add_flag("--no-semantic-edges", o.no_semantic_edges, "Drop semantic edges (ablation)");
  sub->add_flag("--null-features", o.null_features, "Blank node features (ablation)");
}

// ---------------------------------------------------------------------------
// Subcommands

json parse_options_json(const Options& o) {
  json opts = json::object();
  const auto inc = o.include.empty() ? o.config.include : o.include;
  const auto exc = o.exclude.empty() ? o.config.exclude : o.exclude;
  if (!inc.empty()) opts["include"] = inc;
  if (!exc.empty()) opts["exclude"] = exc;
  opts["seed"] = o.seed_or(0);
  return opts;
}

json cmd_build_graph(const Options& o) {
  const std::string project =
      !o.project.empty() ? o.project
                         : o.config.project_dir ? *o.config.project_dir
                                                : (usage_error("missing --project"), "");
  const std::string out = o.path_or(o.out, "graph", "--out");
  json opts = parse_options_json(o);
  if (!o.prune_kinds.empty()) opts["prune_kinds"] = o.prune_kinds;
  else if (o.config.prune_kinds) opts["prune_kinds"] = *o.config.prune_kinds;
  if (o.no_semantic) opts["semantic"] = false;
  cgnn_graph* g = nullptr;
  char* rep = nullptr;
  check(cgnn_graph_build(project.c_str(), opts.dump().c_str(), &g, &rep));
  Graph graph(g);
  json report = json::parse(take(rep));
  check(cgnn_graph_save(graph.get(), out.c_str()));
  report["out"] = out;
  return report;
}

json cmd_static_edges(const Options& o) {
  if (o.heuristic == !o.ingest.empty()) usage_error("give exactly one of --ingest FILE or --heuristic");
  const std::string gpath = o.path_or(o.graph, "graph", "--graph");
  const std::string out = o.path_or(o.out, "edges", "--out");
  Graph g = load_graph(gpath);
  const uint64_t seed = o.seed_or(graph_stats(g.get())["seed"].get<uint64_t>());
  cgnn_edges* e = nullptr;
  json report = json::object();
  std::vector<std::string> inputs = {gpath};
  if (o.heuristic) {
    check(cgnn_edges_heuristic(g.get(), &e));
    report["mode"] = "heuristic";
  } else {
    char* rep = nullptr;
    check(cgnn_edges_ingest(g.get(), o.ingest.c_str(), &e, &rep));
    report = json::parse(take(rep));
    report["mode"] = "ingest";
    inputs.push_back(o.ingest);
  }
  Edges edges(e);
  check(cgnn_edges_save(g.get(), edges.get(), out.c_str(),
                        make_meta(seed, inputs).dump().c_str()));
  report["edges"] = cgnn_edges_count(edges.get());
  report["out"] = out;
  return report;
}

json cmd_instrument(const Options& o) {
  const std::string project =
      !o.project.empty() ? o.project
                         : o.config.project_dir ? *o.config.project_dir
                                                : (usage_error("missing --project"), "");
  const std::string out = o.path_or(o.out, "instrumented", "--out");
  char* rep = nullptr;
  check(cgnn_instrument(project.c_str(), out.c_str(), parse_options_json(o).dump().c_str(),
                        &rep));
  json report = json::parse(take(rep));
  report["out"] = out;
  report["trace_env"] = "CG_TRACE_OUT";
  return report;
}

json cmd_trace_parse(const Options& o) {
  const std::string gpath = o.path_or(o.graph, "graph", "--graph");
  const std::string trace = o.path_or(o.trace, "trace", "--trace");
  const std::string sitemap = o.path_or(o.sitemap, "sitemap", "--sitemap");
  const std::string out = o.path_or(o.out, "edges", "--out");
  Graph g = load_graph(gpath);
  const uint64_t seed = o.seed_or(graph_stats(g.get())["seed"].get<uint64_t>());
  cgnn_edges* e = nullptr;
  char* rep = nullptr;
  check(cgnn_trace_parse(g.get(), trace.c_str(), sitemap.c_str(),
                         o.source_root.empty() ? nullptr : o.source_root.c_str(), &e, &rep));
  Edges edges(e);
  check(cgnn_edges_save(g.get(), edges.get(), out.c_str(),
                        make_meta(seed, {gpath, trace, sitemap}).dump().c_str()));
  json report = json::parse(take(rep));
  report["out"] = out;
  return report;
}

std::vector<std::string> edge_paths(const Options& o) {
  if (!o.edges.empty()) return o.edges;
  const std::string p = o.optional_path("", "edges");
  if (p.empty()) usage_error("missing --edges");
  return {p};
}

void print_epoch(const char* epoch_json, void*) {
  std::fprintf(stderr, "%s\n", epoch_json);
}

json cmd_train(const Options& o) {
  const std::string gpath = o.path_or(o.graph, "graph", "--graph");
  const std::string out = o.path_or(o.out, "checkpoint", "--out");
  const std::vector<std::string> epaths = edge_paths(o);
  Graph g = load_graph(gpath);
  Edges e = load_merged(g.get(), epaths);
  const json hp = hyperparams(o);
  const uint64_t seed = hp.value("seed", uint64_t{0});
  std::vector<std::string> inputs = {gpath};
  inputs.insert(inputs.end(), epaths.begin(), epaths.end());
  char* rep = nullptr;
  check(cgnn_train(g.get(), e.get(), hp.dump().c_str(), out.c_str(),
                   make_meta(seed, inputs).dump().c_str(), o.progress ? print_epoch : nullptr,
                   nullptr, &rep));
  json report = json::parse(take(rep));
  const std::string rpath = o.optional_path(o.report, "report");
  if (!rpath.empty()) {
    json file = strip_timing(report);
    file["meta"] = make_meta(seed, inputs);
    write_text(rpath, file.dump(2) + "\n");
  }
  json summary = report;
  summary.erase("epochs");
  summary["checkpoint"] = out;
  return summary;
}

json cmd_rank(const Options& o) {
  const std::string gpath = o.path_or(o.graph, "graph", "--graph");
  const std::string mpath = o.path_or(o.model, "checkpoint", "--model");
  if (o.callsite.empty()) usage_error("missing --callsite FILE:START");
  if (o.k == 0) usage_error("--k must be at least 1");
  Graph g = load_graph(gpath);
  Model m = load_model(mpath, g.get());
  uint32_t id = 0;
  check(cgnn_graph_find_callsite(g.get(), o.callsite.c_str(), &id));
  char* s = nullptr;
  check(cgnn_rank(m.get(), id, o.k, &s));
  json r = json::parse(take(s));
  r["meta"] = make_meta(graph_stats(g.get())["seed"].get<uint64_t>(), {gpath, mpath});
  return r;
}

json cmd_evaluate(const Options& o) {
  const std::string gpath = o.path_or(o.graph, "graph", "--graph");
  const std::string mpath = o.path_or(o.model, "checkpoint", "--model");
  Graph g = load_graph(gpath);
  Model m = load_model(mpath, g.get());
  Edges test;
  std::vector<std::string> inputs = {gpath, mpath};
  if (!o.test.empty()) {
    test = load_edges(g.get(), o.test);
    inputs.push_back(o.test);
  }
  const std::string preds = o.optional_path(o.predictions, "predictions");
  const json meta = make_meta(o.seed_or(graph_stats(g.get())["seed"].get<uint64_t>()), inputs);
  char* s = nullptr;
  check(cgnn_evaluate(m.get(), test.get(), o.k, preds.empty() ? nullptr : preds.c_str(),
                      meta.dump().c_str(), &s));
  json summary = json::parse(take(s));
  const std::string rpath = o.optional_path(o.report, "report");
  if (!rpath.empty()) write_text(rpath, strip_timing(summary).dump(2) + "\n");
  return summary;
}

json cmd_transfer(const Options& o) {
  if (o.manifest.empty()) usage_error("missing --manifest");
  char* s = nullptr;
  check(cgnn_transfer(o.manifest.c_str(), hyperparams(o).dump().c_str(), &s));
  json report = json::parse(take(s));
  report["meta"] = make_meta(hyperparams(o).value("seed", uint64_t{0}), {o.manifest});
  const std::string rpath = o.optional_path(o.report, "report");
  if (!rpath.empty()) write_text(rpath, strip_timing(report).dump(2) + "\n");
  return report;
}

json cmd_categorize(const Options& o) {
  const std::string gpath = o.path_or(o.graph, "graph", "--graph");
  const std::vector<std::string> epaths = edge_paths(o);
  Graph g = load_graph(gpath);
  Edges e = load_merged(g.get(), epaths);
  char* s = nullptr;
  check(cgnn_categorize(g.get(), e.get(), &s));
  json r = json::parse(take(s));
  std::vector<std::string> inputs = {gpath};
  inputs.insert(inputs.end(), epaths.begin(), epaths.end());
  r["meta"] = make_meta(o.seed_or(graph_stats(g.get())["seed"].get<uint64_t>()), inputs);
  if (!o.out.empty()) write_text(o.out, r.dump(2) + "\n");
  return r;
}

struct ServeCtx {
  bool json_out;
  std::string host;
};

void on_ready(int port, void* user) {
  const auto* c = static_cast<const ServeCtx*>(user);
  if (c->json_out)
    std::cout << json{{"listening", {{"host", c->host}, {"port", port}}}}.dump() << std::endl;
  else
    std::cout << "listening on http://" << c->host << ":" << port << std::endl;
}

json cmd_serve(const Options& o) {
  const std::string gpath = o.path_or(o.graph, "graph", "--graph");
  const std::string log = o.path_or(o.log, "log", "--log");
  const std::vector<std::string> epaths = edge_paths(o);
  Graph g = load_graph(gpath);
  Edges e = load_merged(g.get(), epaths);
  Model m;
  const std::string mpath = o.optional_path(o.model, "checkpoint");
  if (!mpath.empty()) m = load_model(mpath, g.get());
  cgnn_service* s = nullptr;
  check(cgnn_service_open(g.get(), e.get(), m.get(), log.c_str(), &s));
  Service svc(s);
  ServeCtx ctx{o.json_out, o.host};
  check(cgnn_service_serve(svc.get(), o.host.c_str(), o.port, o.ui.empty() ? nullptr : o.ui.c_str(),
                           on_ready, &ctx));
  return json::object();
}

void print_human(const std::string& cmd, const json& r) {
  if (cmd == "rank") {
    std::printf("call site %s:%u-%u, %zu candidates\n",
                r["span"]["file"].get<std::string>().c_str(), r["span"]["start"].get<unsigned>(),
                r["span"]["end"].get<unsigned>(), r["n"].get<size_t>());
    int i = 0;
    for (const auto& c : r["candidates"]) {
      std::printf("%3d  %.6f  %-24s %s:%u-%u\n", i++, c["score"].get<double>(),
                  c["name"].is_null() ? "<anonymous>" : c["name"].get<std::string>().c_str(),
                  c["span"]["file"].get<std::string>().c_str(),
                  c["span"]["start"].get<unsigned>(), c["span"]["end"].get<unsigned>());
    }
    return;
  }
  if (cmd == "evaluate") {
    std::printf("edges %zu  hit@1 %.4f  hit@5 %.4f  hit@20 %.4f  mrr %.4f  random hit@1 %.4f\n",
                r["edges"].get<size_t>(), r["hit"]["1"].get<double>(),
                r["hit"]["5"].get<double>(), r["hit"]["20"].get<double>(),
                r["mrr"].get<double>(), r["random_hit1"].get<double>());
    return;
  }
  if (cmd == "transfer") {
    for (const auto& f : r["folds"]) {
      std::printf("held out %-20s edges %zu  hit@1 %.4f  hit@5 %.4f\n",
                  f["held_out"].get<std::string>().c_str(), f["summary"]["edges"].get<size_t>(),
                  f["summary"]["hit"]["1"].get<double>(), f["summary"]["hit"]["5"].get<double>());
    }
    return;
  }
  if (cmd == "categorize") {
    for (const auto& [k, v] : r["counts"].items())
      std::printf("%-22s %zu\n", k.c_str(), v.get<size_t>());
    return;
  }
  std::cout << r.dump(2) << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Call-graph link prediction toolkit"};
  app.set_version_flag("--version", std::string(cgnn_version()));
  app.require_subcommand(1);
  Options o;
  app.add_flag("--json", o.json_out, "Machine-readable output and diagnostics");
  app.add_option("--config", o.config_path, "Pipeline config JSON");

  auto add_seed = [&](CLI::App* s) { s->add_option("--seed", o.seed, "Random seed"); };
  auto add_globs = [&](CLI::App* s) {
    s->add_option("--include", o.include, "Include glob (repeatable)");
    s->add_option("--exclude", o.exclude, "Exclude glob (repeatable)");
  };

  CLI::App* build = app.add_subcommand("build-graph", "Parse a project into a program graph");
  build->add_option("--project", o.project, "Project directory");
  build->add_option("--out", o.out, "Graph output file");
  build->add_option("--prune-kinds", o.prune_kinds, "Node kinds to prune")->delimiter(',');
  build->add_flag("--no-semantic", o.no_semantic, "Skip semantic name nodes");
  add_globs(build);
  add_seed(build);

  CLI::App* stat = app.add_subcommand("static-edges", "Static call edges for a graph");
  stat->add_option("--graph", o.graph, "Graph file");
  auto* ingest = stat->add_option("--ingest", o.ingest, "Edge file from an external analyzer");
  auto* heur = stat->add_flag("--heuristic", o.heuristic, "Built-in conservative resolver");
  ingest->excludes(heur);
  stat->add_option("--out", o.out, "Edge output file");
  add_seed(stat);

  CLI::App* instr = app.add_subcommand("instrument", "Copy a project with call tracing hooks");
  instr->add_option("--project", o.project, "Project directory");
  instr->add_option("--out", o.out, "Output directory");
  add_globs(instr);
  add_seed(instr);

  CLI::App* tp = app.add_subcommand("trace-parse", "Turn call traces into dynamic edges");
  tp->add_option("--graph", o.graph, "Graph file");
  tp->add_option("--trace", o.trace, "Trace NDJSON written via CG_TRACE_OUT");
  tp->add_option("--sitemap", o.sitemap, "Site map from instrument");
  tp->add_option("--source-root", o.source_root, "Original sources (default: graph project)");
  tp->add_option("--out", o.out, "Edge output file");
  add_seed(tp);

  CLI::App* tr = app.add_subcommand("train", "Train a link predictor");
  tr->add_option("--graph", o.graph, "Graph file");
  tr->add_option("--edges", o.edges, "Edge file(s), merged");
  tr->add_option("--out", o.out, "Checkpoint path");
  tr->add_option("--report", o.report, "Training report file");
  tr->add_flag("--progress", o.progress, "Per-epoch JSON lines on stderr");
  add_hp_flags(tr, o);
  add_seed(tr);

  CLI::App* rank = app.add_subcommand("rank", "Rank candidate callees of a call site");
  rank->add_option("--graph", o.graph, "Graph file");
  rank->add_option("--model", o.model, "Checkpoint");
  rank->add_option("--callsite", o.callsite, "FILE:START or FILE:START:END");
  rank->add_option("--k", o.k, "Candidates to show");

  CLI::App* ev = app.add_subcommand("evaluate", "Rank held-out edges and report hit@k");
  ev->add_option("--graph", o.graph, "Graph file");
  ev->add_option("--model", o.model, "Checkpoint");
  ev->add_option("--test", o.test, "Test edge file (default: checkpoint test split)");
  ev->add_option("--k", o.k, "Candidates per prediction record");
  ev->add_option("--predictions", o.predictions, "Predictions NDJSON output");
  ev->add_option("--report", o.report, "Summary JSON output");
  add_seed(ev);

  CLI::App* xf = app.add_subcommand("transfer", "Leave-one-project-out transfer evaluation");
  xf->add_option("--manifest", o.manifest, "Manifest JSON listing projects");
  xf->add_option("--report", o.report, "Report output");
  add_hp_flags(xf, o);
  add_seed(xf);

  CLI::App* cat = app.add_subcommand("categorize", "Label call edges by category");
  cat->add_option("--graph", o.graph, "Graph file");
  cat->add_option("--edges", o.edges, "Edge file(s)");
  cat->add_option("--out", o.out, "Output JSON");
  add_seed(cat);

  CLI::App* serve = app.add_subcommand("serve", "Serve the triage HTTP API");
  serve->add_option("--port", o.port, "Port (0 picks a free one)");
  serve->add_option("--host", o.host, "Bind address");
  serve->add_option("--graph", o.graph, "Graph file");
  serve->add_option("--model", o.model, "Checkpoint");
  serve->add_option("--edges", o.edges, "Static edge file(s)");
  serve->add_option("--log", o.log, "Decision log NDJSON");
  serve->add_option("--ui", o.ui, "Static UI directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    if (o.json_out) {
      std::cerr << json{{"error", {{"exit_code", kExitUsage}, {"kind", "usage"},
                                    {"message", e.what()}}}}.dump()
                << "\n";
      return kExitUsage;
    }
    app.exit(e);
    return kExitUsage;
  }

  CLI::App* sub = app.get_subcommands().front();
  const std::string cmd = sub->get_name();
  try {
    o.config = load_config(o.config_path);
    json result;
    if (cmd == "build-graph") result = cmd_build_graph(o);
    else if (cmd == "static-edges") result = cmd_static_edges(o);
    else if (cmd == "instrument") result = cmd_instrument(o);
    else if (cmd == "trace-parse") result = cmd_trace_parse(o);
    else if (cmd == "train") result = cmd_train(o);
    else if (cmd == "rank") result = cmd_rank(o);
    else if (cmd == "evaluate") result = cmd_evaluate(o);
    else if (cmd == "transfer") result = cmd_transfer(o);
    else if (cmd == "categorize") result = cmd_categorize(o);
    else if (cmd == "serve") result = cmd_serve(o);
    if (cmd != "serve") {
      if (o.json_out) std::cout << result.dump() << "\n";
      else print_human(cmd, result);
    }
    return 0;
  } catch (const CliError& e) {
    if (o.json_out) {
      std::cerr << json{{"error", {{"exit_code", e.code}, {"kind", e.kind},
                                    {"message", e.message}}}}.dump()
                << "\n";
    } else {
      std::cerr << "cgnn " << cmd << ": " << e.kind << " error: " << e.message << "\n";
    }
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "cgnn " << cmd << ": internal error: " << e.what() << "\n";
    return kExitData;
  }
}
