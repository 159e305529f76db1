#include <charconv>

#include "cgnn/error.hpp"
#include "cgnn/triage.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cgnn {

using ojson = nlohmann::ordered_json;

namespace {

const char* kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::kUsage: return "usage";
    case ErrorKind::kData: return "data";
    case ErrorKind::kIo: return "io";
    case ErrorKind::kNotFound: return "not_found";
    case ErrorKind::kInternal: return "internal";
  }
  return "internal";
}

int status_of(ErrorKind k) {
  switch (k) {
    case ErrorKind::kUsage:
    case ErrorKind::kData: return 400;
    case ErrorKind::kNotFound: return 404;
    default: return 500;
  }
}

void send_error(httplib::Response& res, int status, const std::string& kind,
                const std::string& message) {
  res.status = status;
  res.set_content(ojson{{"error", {{"kind", kind}, {"message", message}}}}.dump(),
                  "application/json");
}

template <typename F>
httplib::Server::Handler guarded(F f) {
  return [f](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, status_of(e.kind()), kind_name(e.kind()), e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    }
  };
}

uint64_t parse_uint(const std::string& s, const char* what) {
  uint64_t v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size())
    throw_usage(std::string(what) + " must be a non-negative integer");
  return v;
}

}  // namespace

struct TriageHttpServer::Impl {
  httplib::Server server;
};

TriageHttpServer::TriageHttpServer(TriageService& service, const std::string& ui_dir)
    : impl_(std::make_unique<Impl>()) {
  httplib::Server& s = impl_->server;
  s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  s.Options(R"(/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  s.Get("/v1/unresolved", guarded([&service](const httplib::Request&, httplib::Response& res) {
          res.set_content(service.unresolved_json(), "application/json");
        }));

  s.Get(R"(/v1/candidates/([^/]+))",
        guarded([&service](const httplib::Request& req, httplib::Response& res) {
          const uint64_t cs = parse_uint(req.matches[1], "callsite");
          size_t k = kMaxK;
          if (req.has_param("k")) k = parse_uint(req.get_param_value("k"), "k");
          if (k == 0) throw_usage("k must be at least 1");
          if (cs > UINT32_MAX) throw_not_found("unknown call site " + req.matches[1].str());
          res.set_content(service.candidates_json(static_cast<NodeId>(cs), k),
                          "application/json");
        }));

  s.Post("/v1/decisions", guarded([&service](const httplib::Request& req,
                                             httplib::Response& res) {
           TriageDecision d = decision_from_json(req.body);
           d = service.record_decision(std::move(d));
           res.status = 201;
           res.set_content(
               ojson{{"id", d.id}, {"decision", ojson::parse(decision_to_json(d))}}.dump(),
               "application/json");
         }));

  s.Get("/v1/export", guarded([&service](const httplib::Request& req, httplib::Response& res) {
          const std::string format = req.has_param("format") ? req.get_param_value("format")
                                                             : "json";
          if (format == "json") {
            res.set_content(service.export_json(), "application/json");
            return;
          }
          if (format != "ndjson") throw_usage("format must be json or ndjson");
          const std::string part =
              req.has_param("part") ? req.get_param_value("part") : "all";
          if (part != "all" && part != "analyst") throw_usage("part must be all or analyst");
          const AugmentedEdges a = service.export_augmented();
          res.set_content(edges_to_ndjson(service.graph(), part == "all" ? a.all : a.analyst,
                                          service.meta_json()),
                          "application/x-ndjson");
        }));

  if (!ui_dir.empty() && !s.set_mount_point("/", ui_dir))
    throw_usage("UI directory does not exist: " + ui_dir);
}

TriageHttpServer::~TriageHttpServer() = default;

int TriageHttpServer::bind(const std::string& host, int port) {
  httplib::Server& s = impl_->server;
  if (port == 0) {
    const int p = s.bind_to_any_port(host);
    if (p < 0) throw_io("cannot bind " + host);
    return p;
  }
  if (!s.bind_to_port(host, port))
    throw_io("cannot bind " + host + ":" + std::to_string(port));
  return port;
}

void TriageHttpServer::listen() { impl_->server.listen_after_bind(); }

void TriageHttpServer::stop() { impl_->server.stop(); }

}  // namespace cgnn
