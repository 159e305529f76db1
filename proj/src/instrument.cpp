#include "cgnn/instrument.hpp"

#include <algorithm>
#include <filesystem>
#include <set>
#include <sstream>

#include "cgnn/error.hpp"
#include "cgnn/js/ast.hpp"
#include "cgnn/js/parser.hpp"
#include "cgnn/util.hpp"
#include "json.hpp"

namespace cgnn {

namespace fs = std::filesystem;
using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

constexpr const char* kShimSource = R"JS('use strict';
// Entry logger loaded ahead of instrumented code. Every instrumented function
// calls it first; it records the entered function and the frame that called
// it, mapped back to coordinates of the original sources.
const fs = require('fs');
const path = require('path');
const url = require('url');

const SHIFTS = __SHIFTS__;
const ROOT = __dirname;
const OUT = process.env.CG_TRACE_OUT;
let fd = null;

function originalColumn(file, line, col) {
  const rows = SHIFTS[file] && SHIFTS[file][line];
  if (!rows) return col;
  let shift = 0;
  for (const [at, len] of rows) {
    if (at + len <= col) shift += len;
    else if (at <= col) return at - shift;
    else break;
  }
  return col - shift;
}

function emit(record) {
  if (!OUT) return;
  if (fd === null) fd = fs.openSync(OUT, 'a');
  fs.writeSync(fd, JSON.stringify(record) + '\n');
}

function log(file, start) {
  const savedPrepare = Error.prepareStackTrace;
  const savedLimit = Error.stackTraceLimit;
  Error.prepareStackTrace = (_, frames) => frames;
  Error.stackTraceLimit = 2;
  const holder = {};
  Error.captureStackTrace(holder, log);
  const frames = holder.stack;
  Error.prepareStackTrace = savedPrepare;
  Error.stackTraceLimit = savedLimit;
  const record = {callee_file: file, callee_start: start,
                  caller_file: null, caller_line: null, caller_col: null};
  const caller = Array.isArray(frames) ? frames[1] : undefined;
  let name = caller ? caller.getFileName() : null;
  if (name && !caller.isEval()) {
    if (name.startsWith('file://')) name = url.fileURLToPath(name);
    const rel = path.relative(ROOT, name).split(path.sep).join('/');
    const line = caller.getLineNumber();
    const col = caller.getColumnNumber();
    if (!rel.startsWith('..') && !path.isAbsolute(rel) && SHIFTS[rel]) {
      record.caller_file = rel;
      record.caller_line = line;
      record.caller_col = originalColumn(rel, line, col);
    } else {
      record.caller_file = name;
      record.caller_line = line;
      record.caller_col = col;
    }
  }
  emit(record);
}

globalThis.__cg_log = log;
module.exports = log;
)JS";

struct Splice {
  uint32_t offset;
  int order;       // suffixes before prefixes at the same offset
  int64_t rank;    // nesting tiebreak
  std::string text;
};

bool has_module_syntax(const js::AstNode& program) {
  for (const js::AstNode& c : program.children) {
    if (c.kind.rfind("Import", 0) == 0 && c.kind != "ImportExpression")
      return true;
    if (c.kind.rfind("Export", 0) == 0) return true;
  }
  return false;
}

void collect_splices(const js::AstNode& n, const std::string& call_prefix,
                     const std::string& file_literal, std::string_view src,
                     std::vector<Splice>& out, size_t& functions) {
  if (js::is_function_kind(n.kind)) {
    const std::string hook = call_prefix + "(" + file_literal + "," +
                             std::to_string(n.start) + ");";
    if (n.body_insert) {
      const uint32_t at = *n.body_insert;
      const char before = at > 0 ? src[at - 1] : '{';
      const std::string lead = (before == '{' || before == ';') ? "" : ";";
      out.push_back({at, 1, n.start, lead + hook});
      ++functions;
    } else if (!n.children.empty()) {
      const js::AstNode& body = n.children.back();
      out.push_back({body.start, 1, n.start, "{" + hook + "return "});
      out.push_back({body.end, 0, -static_cast<int64_t>(n.start), ";}"});
      ++functions;
    }
  }
  for (const js::AstNode& c : n.children)
    collect_splices(c, call_prefix, file_literal, src, out, functions);
}

// Positions of line starts, treating \r\n, \n, \r, U+2028 and U+2029 as
// terminators, the way V8 numbers lines.
std::vector<uint32_t> line_starts(std::string_view text) {
  std::vector<uint32_t> starts = {0};
  for (uint32_t i = 0; i < text.size(); ++i) {
    const unsigned char c = text[i];
    if (c == '\n') {
      starts.push_back(i + 1);
    } else if (c == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      starts.push_back(i + 1);
    } else if (c == 0xE2 && i + 2 < text.size() &&
               static_cast<unsigned char>(text[i + 1]) == 0x80 &&
               (static_cast<unsigned char>(text[i + 2]) == 0xA8 ||
                static_cast<unsigned char>(text[i + 2]) == 0xA9)) {
      i += 2;
      starts.push_back(i + 1);
    }
  }
  return starts;
}

uint32_t utf16_units(std::string_view text, uint32_t from, uint32_t to) {
  uint32_t units = 0;
  for (uint32_t i = from; i < to; ++i) {
    const unsigned char c = text[i];
    if ((c & 0xC0) == 0x80) continue;  // continuation byte
    units += (c >= 0xF0) ? 2 : 1;
  }
  return units;
}

std::string relative_spec(const fs::path& from_dir, const fs::path& target) {
  std::string rel = target.lexically_relative(from_dir).generic_string();
  if (rel.rfind("../", 0) != 0) rel = "./" + rel;
  return rel;
}

void assign_sites(const js::AstNode& n, const std::string& file, NodeId& next,
                  SiteMap& map) {
  const NodeId id = next++;
  if (js::is_function_kind(n.kind) || js::is_call_site_kind(n.kind))
    map[site_key(file, n.start, n.end)] = id;
  for (const js::AstNode& c : n.children) assign_sites(c, file, next, map);
}

}  // namespace

std::string site_key(const std::string& file, uint32_t start, uint32_t end) {
  return file + ":" + std::to_string(start) + ":" + std::to_string(end);
}

std::string instrument_source(const std::string& file, const std::string& source,
                              bool module, const std::string& shim_spec,
                              std::vector<Insertion>* shifts,
                              size_t* functions) {
  js::AstNode program = js::parse_program(source);
  const std::string spec_literal = json(shim_spec).dump(-1, ' ', true);
  const std::string call_prefix =
      module ? "globalThis.__cg_log"
             : "(globalThis.__cg_log||require(" + spec_literal + "))";
  std::vector<Splice> splices;
  size_t count = 0;
  collect_splices(program, call_prefix, json(file).dump(-1, ' ', true), source,
                  splices, count);
  if (module) {
    uint32_t at = 0;
    if (source.rfind("#!", 0) == 0) {
      at = static_cast<uint32_t>(source.find_first_of("\r\n"));
      if (at == std::string::npos) at = static_cast<uint32_t>(source.size());
    }
    splices.push_back({at, -1, 0, "import " + spec_literal + ";"});
  }
  std::stable_sort(splices.begin(), splices.end(),
                   [](const Splice& a, const Splice& b) {
                     if (a.offset != b.offset) return a.offset < b.offset;
                     if (a.order != b.order) return a.order < b.order;
                     return a.rank < b.rank;
                   });
  std::string out;
  out.reserve(source.size() + splices.size() * 48);
  std::vector<uint32_t> inserted_at;  // offsets in `out`
  uint32_t pos = 0;
  for (const Splice& s : splices) {
    out.append(source, pos, s.offset - pos);
    pos = s.offset;
    inserted_at.push_back(static_cast<uint32_t>(out.size()));
    out += s.text;
  }
  out.append(source, pos, std::string::npos);

  if (shifts) {
    shifts->clear();
    const std::vector<uint32_t> starts = line_starts(out);
    for (size_t i = 0; i < splices.size(); ++i) {
      const uint32_t at = inserted_at[i];
      const auto it = std::upper_bound(starts.begin(), starts.end(), at);
      const uint32_t line = static_cast<uint32_t>(it - starts.begin());
      const uint32_t col = utf16_units(out, starts[line - 1], at) + 1;
      shifts->push_back(
          {line, col, static_cast<uint32_t>(splices[i].text.size())});
    }
  }
  if (functions) *functions = count;
  return out;
}

InstrumentResult instrument_project(const std::string& project_dir,
                                    const std::string& out_dir,
                                    const ParseOptions& options) {
  ParseResult parsed = parse_project(project_dir, options);
  const ProgramGraph& g = parsed.graph;
  InstrumentResult r;
  r.diagnostics = parsed.diagnostics;

  const fs::path src_root = fs::weakly_canonical(project_dir);
  const fs::path dst_root = fs::weakly_canonical(out_dir);
  if (src_root == dst_root)
    throw_usage("output directory must differ from the project directory");
  fs::create_directories(dst_root);

  for (auto it = fs::recursive_directory_iterator(src_root);
       it != fs::recursive_directory_iterator(); ++it) {
    const fs::path p = it->path();
    if (fs::weakly_canonical(p) == dst_root) {
      it.disable_recursion_pending();
      continue;
    }
    const fs::path target = dst_root / p.lexically_relative(src_root);
    if (it->is_directory()) {
      fs::create_directories(target);
    } else if (it->is_regular_file()) {
      fs::create_directories(target.parent_path());
      fs::copy_file(p, target, fs::copy_options::overwrite_existing);
    }
  }

  std::map<int, NodeId> program_ids;
  for (const SyntaxNode& n : g.nodes) {
    if (n.kind == "Program") program_ids[n.file] = n.id;
  }

  json shifts_table = json::object();
  const fs::path shim_path = dst_root / kShimFile;
  for (size_t f = 0; f < g.files.size(); ++f) {
    const std::string& file = g.files[f];
    const std::string source = read_file(src_root / file);
    js::AstNode program = js::parse_program(source);
    NodeId next = program_ids.at(static_cast<int>(f));
    assign_sites(program, file, next, r.site_map);

    bool module = has_module_syntax(program);
    if (file.size() > 4 && file.substr(file.size() - 4) == ".mjs") module = true;
    if (file.size() > 4 && file.substr(file.size() - 4) == ".cjs") module = false;
    const fs::path target = dst_root / file;
    std::vector<Insertion> shifts;
    size_t functions = 0;
    const std::string text =
        instrument_source(file, source, module,
                          relative_spec(target.parent_path(), shim_path),
                          &shifts, &functions);
    write_file(target, text);
    ++r.files_instrumented;
    r.functions_instrumented += functions;

    json lines = json::object();
    for (const Insertion& s : shifts)
      lines[std::to_string(s.line)].push_back({s.column, s.length});
    shifts_table[file] = lines;
  }

  std::string shim = kShimSource;
  const std::string marker = "__SHIFTS__";
  shim.replace(shim.find(marker), marker.size(), shifts_table.dump());
  write_file(shim_path, shim);

  ojson meta;
  meta["tool_version"] = kToolVersion;
  meta["seed"] = options.seed;
  meta["input_digests"] = g.meta.input_digests;
  meta["project_dir"] = project_dir;
  write_file(dst_root / kSiteMapFile, site_map_to_json(r.site_map, meta.dump()));
  return r;
}

std::string site_map_to_json(const SiteMap& map, const std::string& meta_json) {
  std::string out = "{\"__meta__\":" + meta_json;
  for (const auto& [key, id] : map) {
    out += ",\n" + json(key).dump() + ":" + std::to_string(id);
  }
  out += "}\n";
  return out;
}

SiteMap site_map_from_json(std::string_view text) {
  SiteMap map;
  try {
    json j = json::parse(text);
    for (const auto& [k, v] : j.items()) {
      if (k == "__meta__") continue;
      map[k] = v.get<NodeId>();
    }
  } catch (const json::exception& e) {
    throw_data(std::string("malformed site map: ") + e.what());
  }
  return map;
}

std::optional<uint32_t> offset_of(std::string_view text, uint32_t line,
                                  uint32_t column) {
  const std::vector<uint32_t> starts = line_starts(text);
  if (line == 0 || line > starts.size() || column == 0) return std::nullopt;
  uint32_t pos = starts[line - 1];
  uint32_t units = column - 1;
  while (units > 0 && pos < text.size()) {
    const unsigned char c = text[pos];
    uint32_t len = 1, u = 1;
    if (c >= 0xF0) {
      len = 4;
      u = 2;
    } else if (c >= 0xE0) {
      len = 3;
    } else if (c >= 0xC0) {
      len = 2;
    }
    if (u > units) break;
    units -= u;
    pos += len;
  }
  if (pos > text.size()) return std::nullopt;
  return pos;
}

TraceParseResult parse_traces(std::string_view trace_text, const SiteMap& site_map,
                              const ProgramGraph& graph,
                              const std::string& source_root) {
  TraceParseResult r;
  std::map<std::pair<std::string, uint32_t>, NodeId> defs;
  for (const auto& [key, id] : site_map) {
    if (!graph.has(id) || !js::is_function_kind(graph.node(id).kind)) continue;
    const size_t b = key.rfind(':');
    const size_t a = key.rfind(':', b - 1);
    if (a == std::string::npos || b == std::string::npos) continue;
    defs[{key.substr(0, a), static_cast<uint32_t>(std::stoul(key.substr(a + 1, b - a - 1)))}] = id;
  }
  const std::set<std::string> files(graph.files.begin(), graph.files.end());
  const SpanIndex calls(graph, SpanIndex::Role::kCallSite);
  std::map<std::string, std::string> sources;

  std::istringstream in{std::string(trace_text)};
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "event " + std::to_string(lineno);
    TraceEvent ev;
    try {
      json j = json::parse(line);
      if (j.contains("meta")) continue;
      ev.callee_file = j.at("callee_file").get<std::string>();
      ev.callee_start = j.at("callee_start").get<uint32_t>();
      if (!j.at("caller_file").is_null()) {
        ev.caller_file = j["caller_file"].get<std::string>();
        ev.caller_line = j.at("caller_line").get<uint32_t>();
        ev.caller_col = j.at("caller_col").get<uint32_t>();
      }
    } catch (const json::exception& e) {
      r.diagnostics.push_back({where, std::string("malformed event: ") + e.what()});
      continue;
    }
    ++r.events;
    if (!ev.caller_file) {
      ++r.native_dropped;
      continue;
    }
    if (!files.count(*ev.caller_file)) {
      ++r.external_dropped;
      continue;
    }
    auto fn = defs.find({ev.callee_file, ev.callee_start});
    if (fn == defs.end()) {
      ++r.unmapped;
      r.diagnostics.push_back({where, "callee " + ev.callee_file + ":" +
                                          std::to_string(ev.callee_start) +
                                          " is not in the site map"});
      continue;
    }
    auto src = sources.find(*ev.caller_file);
    if (src == sources.end()) {
      src = sources
                .emplace(*ev.caller_file,
                         read_file(fs::path(source_root) / *ev.caller_file))
                .first;
    }
    auto off = offset_of(src->second, ev.caller_line, ev.caller_col);
    std::optional<NodeId> cs;
    if (off) cs = calls.enclosing(*ev.caller_file, *off, *off + 1);
    if (!cs) {
      ++r.unmapped;
      r.diagnostics.push_back(
          {where, "caller " + *ev.caller_file + ":" +
                      std::to_string(ev.caller_line) + ":" +
                      std::to_string(ev.caller_col) + " is not inside a call site"});
      continue;
    }
    r.edges.add({*cs, fn->second, kDynamic, 1});
  }
  return r;
}

}  // namespace cgnn
