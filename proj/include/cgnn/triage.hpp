#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "cgnn/evaluation.hpp"
#include "cgnn/ground_truth.hpp"
#include "cgnn/model.hpp"

namespace cgnn {

struct TriageDecision {
  uint64_t id = 0;  // position in the log, from 1
  NodeId callsite = 0;
  std::optional<NodeId> callee;  // none rejects every candidate
  std::string verdict;           // accepted | rejected | skipped
  std::string analyst;
  std::string timestamp;  // RFC 3339 UTC, e.g. 2024-05-01T12:00:00.000Z
};

std::string decision_to_json(const TriageDecision& d);
// Parses a wire/log record; id and timestamp may be absent.
TriageDecision decision_from_json(std::string_view text);

// Orders two RFC 3339 UTC timestamps; throws a usage error on bad syntax.
int compare_timestamps(const std::string& a, const std::string& b);
std::string utc_now();

// Final decision per call site: latest timestamp wins, later log position
// breaks ties.
std::map<NodeId, TriageDecision> fold_decisions(const std::vector<TriageDecision>& log);

std::vector<TriageDecision> read_decision_log(const std::string& path);

struct AugmentedEdges {
  CallEdgeSet all;      // static edges plus accepted analyst edges
  CallEdgeSet analyst;  // accepted analyst edges only
};
AugmentedEdges augment_edges(const CallEdgeSet& static_edges,
                             const std::map<NodeId, TriageDecision>& folded);

struct SiteInfo {
  NodeId id = 0;
  std::string file;
  uint32_t start = 0, end = 0;
  uint32_t line = 0;  // 1-based
  std::optional<std::string> name;
  std::optional<std::string> excerpt;
};

class TriageService {
 public:
  // `params` may be null, in which case candidate queries fail. `context`
  // holds the call edges used as call_msg messages when scoring.
  TriageService(ProgramGraph graph, CallEdgeSet static_edges,
                std::shared_ptr<const ModelParams> params, CallEdgeSet context,
                std::string log_path);

  // Call sites without a static edge, by file then span.
  std::vector<SiteInfo> list_unresolved() const;
  CandidateRanking get_candidates(NodeId callsite, size_t k) const;
  TriageDecision record_decision(TriageDecision d);
  AugmentedEdges export_augmented() const;
  std::vector<TriageDecision> decisions() const;

  SiteInfo site_info(NodeId id) const;
  const ProgramGraph& graph() const { return graph_; }
  std::string meta_json() const;

  std::string unresolved_json() const;
  std::string candidates_json(NodeId callsite, size_t k) const;
  std::string export_json() const;

 private:
  ProgramGraph graph_;
  CallEdgeSet static_edges_;
  std::shared_ptr<const ModelParams> params_;
  std::unique_ptr<Scorer> scorer_;
  CallEdgeSet context_;
  std::string log_path_;
  std::vector<std::string> sources_;  // by file index, empty if unreadable
  std::vector<std::vector<uint32_t>> line_starts_;

  mutable std::shared_mutex mu_;
  std::vector<TriageDecision> log_;
};

// HTTP front end for the v1 wire protocol. When ui_dir is non-empty its
// files are served under "/".
class TriageHttpServer {
 public:
  TriageHttpServer(TriageService& service, const std::string& ui_dir);
  ~TriageHttpServer();
  // Returns the bound port; port 0 picks a free one.
  int bind(const std::string& host, int port);
  void listen();  // blocks until stop()
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cgnn
