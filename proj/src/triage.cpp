#include "cgnn/triage.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <mutex>
#include <regex>
#include <set>
#include <sstream>

#include "cgnn/error.hpp"
#include "cgnn/js/ast.hpp"
#include "cgnn/util.hpp"
#include "json.hpp"

namespace cgnn {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr size_t kExcerptMax = 200;

const char* kVerdicts[] = {"accepted", "rejected", "skipped"};

// Days since 1970-01-01 of a proleptic Gregorian date.
int64_t days_from_civil(int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<int64_t>(doe) - 719468;
}

std::pair<int64_t, int64_t> parse_timestamp(const std::string& t) {
  static const std::regex re(
      R"(^(\d{4})-(\d{2})-(\d{2})T(\d{2}):(\d{2}):(\d{2})(?:\.(\d{1,9}))?(Z|[+-]\d{2}:\d{2})$)");
  std::smatch m;
  if (!std::regex_match(t, m, re)) throw_usage("timestamp is not RFC 3339: " + t);
  const auto num = [&](int i) { return std::stoll(m[i].str()); };
  const unsigned month = static_cast<unsigned>(num(2)), day = static_cast<unsigned>(num(3));
  if (month < 1 || month > 12 || day < 1 || day > 31 || num(4) > 23 || num(5) > 59 ||
      num(6) > 60)
    throw_usage("timestamp out of range: " + t);
  int64_t secs = days_from_civil(num(1), month, day) * 86400 + num(4) * 3600 +
                 num(5) * 60 + num(6);
  const std::string zone = m[8].str();
  if (zone != "Z") {
    const int64_t off = std::stoll(zone.substr(1, 2)) * 3600 + std::stoll(zone.substr(4, 2)) * 60;
    secs += zone[0] == '+' ? -off : off;
  }
  std::string frac = m[7].str();
  frac.resize(9, '0');
  return {secs, std::stoll(frac)};
}

std::optional<std::string> opt_string(const json& j, const char* key) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  return j[key].get<std::string>();
}

ojson opt_json(const std::optional<std::string>& s) { return s ? ojson(*s) : ojson(); }

void append_line(const std::string& path, const std::string& line) {
  const int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw_io("cannot open decision log " + path);
  const std::string data = line + "\n";
  size_t done = 0;
  while (done < data.size()) {
    const ssize_t n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      ::close(fd);
      throw_io("cannot write decision log " + path);
    }
    done += static_cast<size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

ojson ndjson_records(const std::string& text) {
  ojson arr = ojson::array();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    ojson j = ojson::parse(line);
    if (!j.contains("meta")) arr.push_back(std::move(j));
  }
  return arr;
}

}  // namespace

// ---------------------------------------------------------------------------
// Decisions

std::string decision_to_json(const TriageDecision& d) {
  ojson j;
  j["id"] = d.id;
  j["callsite"] = d.callsite;
  j["callee"] = d.callee ? ojson(*d.callee) : ojson();
  j["verdict"] = d.verdict;
  j["analyst"] = d.analyst;
  j["timestamp"] = d.timestamp;
  return j.dump();
}

TriageDecision decision_from_json(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw_usage(std::string("decision is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw_usage("decision must be a JSON object");
  TriageDecision d;
  try {
    d.id = j.value("id", uint64_t{0});
    d.callsite = j.at("callsite").get<NodeId>();
    if (j.contains("callee") && !j["callee"].is_null()) d.callee = j["callee"].get<NodeId>();
    d.verdict = j.at("verdict").get<std::string>();
    d.analyst = j.value("analyst", std::string());
    d.timestamp = opt_string(j, "timestamp").value_or("");
  } catch (const json::exception& e) {
    throw_usage(std::string("malformed decision: ") + e.what());
  }
  if (std::find(std::begin(kVerdicts), std::end(kVerdicts), d.verdict) == std::end(kVerdicts))
    throw_usage("verdict must be accepted, rejected or skipped");
  if (d.verdict == "accepted" && !d.callee) throw_usage("an accepted decision needs a callee");
  if (!d.timestamp.empty()) parse_timestamp(d.timestamp);
  return d;
}

int compare_timestamps(const std::string& a, const std::string& b) {
  const auto ta = parse_timestamp(a), tb = parse_timestamp(b);
  return ta < tb ? -1 : ta > tb ? 1 : 0;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      now.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec,
                static_cast<int>(ms % 1000));
  return buf;
}

std::map<NodeId, TriageDecision> fold_decisions(const std::vector<TriageDecision>& log) {
  std::map<NodeId, TriageDecision> state;
  for (const TriageDecision& d : log) {
    auto it = state.find(d.callsite);
    if (it == state.end()) {
      state.emplace(d.callsite, d);
    } else if (compare_timestamps(d.timestamp, it->second.timestamp) >= 0) {
      it->second = d;
    }
  }
  return state;
}

std::vector<TriageDecision> read_decision_log(const std::string& path) {
  std::vector<TriageDecision> log;
  if (!fs::exists(path)) return log;
  std::istringstream in(read_file(path));
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      TriageDecision d = decision_from_json(line);
      if (d.timestamp.empty()) throw_usage("missing timestamp");
      d.id = log.size() + 1;
      log.push_back(std::move(d));
    } catch (const Error& e) {
      throw_data(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return log;
}

AugmentedEdges augment_edges(const CallEdgeSet& static_edges,
                             const std::map<NodeId, TriageDecision>& folded) {
  AugmentedEdges out;
  out.all = static_edges;
  for (const auto& [cs, d] : folded) {
    if (d.verdict != "accepted" || !d.callee) continue;
    const CallEdge e{cs, *d.callee, kAnalyst, 0};
    out.analyst.add(e);
    out.all.add(e);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Service

TriageService::TriageService(ProgramGraph graph, CallEdgeSet static_edges,
                             std::shared_ptr<const ModelParams> params,
                             CallEdgeSet context, std::string log_path)
    : graph_(std::move(graph)),
      static_edges_(std::move(static_edges)),
      params_(std::move(params)),
      context_(std::move(context)),
      log_path_(std::move(log_path)) {
  merge_edge_sets(graph_, {static_edges_, context_});  // validates endpoints
  if (params_) scorer_ = std::make_unique<Scorer>(*params_, graph_, &context_);
  for (const std::string& f : graph_.files) {
    std::string text;
    try {
      if (!graph_.meta.project_dir.empty())
        text = read_file(fs::path(graph_.meta.project_dir) / f);
    } catch (const Error&) {
    }
    std::vector<uint32_t> starts{0};
    for (size_t i = 0; i < text.size(); ++i)
      if (text[i] == '\n') starts.push_back(static_cast<uint32_t>(i + 1));
    sources_.push_back(std::move(text));
    line_starts_.push_back(std::move(starts));
  }
  log_ = read_decision_log(log_path_);
  for (const TriageDecision& d : log_) {
    if (!graph_.has(d.callsite) || !js::is_call_site_kind(graph_.node(d.callsite).kind))
      throw_data("decision log refers to unknown call site " + std::to_string(d.callsite));
  }
}

SiteInfo TriageService::site_info(NodeId id) const {
  const SyntaxNode& n = graph_.node(id);
  SiteInfo s;
  s.id = id;
  s.start = n.start;
  s.end = n.end;
  s.name = n.ref_name;
  if (n.file < 0) return s;
  s.file = graph_.files[n.file];
  const auto& starts = line_starts_[n.file];
  const auto it = std::upper_bound(starts.begin(), starts.end(), n.start);
  const size_t line = static_cast<size_t>(it - starts.begin());  // 1-based
  s.line = static_cast<uint32_t>(line);
  const std::string& text = sources_[n.file];
  if (!text.empty() && n.start <= text.size()) {
    const size_t b = starts[line - 1];
    size_t e = text.find('\n', b);
    if (e == std::string::npos) e = text.size();
    std::string ex = text.substr(b, e - b);
    if (!ex.empty() && ex.back() == '\r') ex.pop_back();
    if (ex.size() > kExcerptMax) ex.resize(kExcerptMax);
    s.excerpt = std::move(ex);
  }
  return s;
}

std::vector<SiteInfo> TriageService::list_unresolved() const {
  std::set<NodeId> resolved;
  for (const auto& [key, e] : static_edges_.edges) resolved.insert(key.first);
  std::vector<SiteInfo> out;
  for (NodeId cs : enumerate_endpoints(graph_).call_sites)
    if (!resolved.count(cs)) out.push_back(site_info(cs));
  std::sort(out.begin(), out.end(), [](const SiteInfo& a, const SiteInfo& b) {
    return std::tie(a.file, a.start, a.end, a.id) < std::tie(b.file, b.start, b.end, b.id);
  });
  return out;
}

CandidateRanking TriageService::get_candidates(NodeId callsite, size_t k) const {
  if (!graph_.has(callsite) || !js::is_call_site_kind(graph_.node(callsite).kind))
    throw_not_found("unknown call site " + std::to_string(callsite));
  if (!scorer_) throw_usage("no model loaded");
  return scorer_->rank(callsite, std::nullopt, k);
}

TriageDecision TriageService::record_decision(TriageDecision d) {
  if (!graph_.has(d.callsite) || !js::is_call_site_kind(graph_.node(d.callsite).kind))
    throw_usage("callsite " + std::to_string(d.callsite) + " is not a call site");
  if (d.callee && (!graph_.has(*d.callee) ||
                   !js::is_function_kind(graph_.node(*d.callee).kind)))
    throw_usage("callee " + std::to_string(*d.callee) +
                " is not a function definition of the project");
  if (d.verdict == "accepted" && !d.callee) throw_usage("an accepted decision needs a callee");
  if (d.timestamp.empty()) d.timestamp = utc_now();
  parse_timestamp(d.timestamp);
  std::unique_lock lock(mu_);
  d.id = log_.size() + 1;
  ojson rec = ojson::parse(decision_to_json(d));
  rec.erase("id");
  append_line(log_path_, rec.dump());
  log_.push_back(d);
  return d;
}

std::vector<TriageDecision> TriageService::decisions() const {
  std::shared_lock lock(mu_);
  return log_;
}

AugmentedEdges TriageService::export_augmented() const {
  return augment_edges(static_edges_, fold_decisions(decisions()));
}

std::string TriageService::meta_json() const {
  ojson m;
  m["tool_version"] = kToolVersion;
  m["seed"] = graph_.meta.seed;
  m["input_digests"] = graph_.meta.input_digests;
  return m.dump();
}

namespace {

ojson site_json(const SiteInfo& s) {
  ojson j;
  j["callsite"] = s.id;
  j["file"] = s.file;
  j["start"] = s.start;
  j["end"] = s.end;
  j["line"] = s.line;
  j["name"] = opt_json(s.name);
  j["excerpt"] = opt_json(s.excerpt);
  return j;
}

}  // namespace

std::string TriageService::unresolved_json() const {
  const auto folded = fold_decisions(decisions());
  ojson arr = ojson::array();
  for (const SiteInfo& s : list_unresolved()) {
    ojson j = site_json(s);
    const auto it = folded.find(s.id);
    j["decision"] = it == folded.end() ? ojson() : ojson::parse(decision_to_json(it->second));
    arr.push_back(std::move(j));
  }
  ojson out;
  out["meta"] = ojson::parse(meta_json());
  out["count"] = arr.size();
  out["callsites"] = std::move(arr);
  return out.dump();
}

std::string TriageService::candidates_json(NodeId callsite, size_t k) const {
  const CandidateRanking r = get_candidates(callsite, k);
  ojson cands = ojson::array();
  for (const auto& [id, score] : r.candidates) {
    ojson c{{"callee", id}, {"score", score}};
    const ojson site = site_json(site_info(id));
    for (const auto& [key, v] : site.items())
      if (key != "callsite") c[key] = v;
    cands.push_back(std::move(c));
  }
  ojson out;
  out["meta"] = ojson::parse(meta_json());
  out["callsite"] = site_json(site_info(callsite));
  out["n"] = r.n;
  out["candidates"] = std::move(cands);
  return out.dump();
}

std::string TriageService::export_json() const {
  const AugmentedEdges a = export_augmented();
  const std::string meta = meta_json();
  ojson out;
  out["meta"] = ojson::parse(meta);
  out["edges"] = ndjson_records(edges_to_ndjson(graph_, a.all, meta));
  out["analyst_edges"] = ndjson_records(edges_to_ndjson(graph_, a.analyst, meta));
  return out.dump();
}

}  // namespace cgnn
