#include "corpstat/http_api.hpp"

#include <httplib.h>

#include <optional>
#include <string_view>

#include <fmt/format.h>

#include "corpstat/errors.hpp"
#include "corpstat/random.hpp"
#include "corpstat/report.hpp"

namespace corpstat {

namespace {

struct BadRequest : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kNotFound: return 404;
    case ErrorCode::kState:
    case ErrorCode::kPending: return 409;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kValidation:
    case ErrorCode::kDegenerate: return 422;
    case ErrorCode::kIo:
    case ErrorCode::kConfig: return 500;
  }
  return 500;
}

ApiResponse error_response(int status, std::string_view code, std::string_view message) {
  return {status,
          {{"schema_version", kApiSchemaVersion},
           {"error", {{"code", code}, {"message", message}}}}};
}

ApiResponse ok(nlohmann::json body, int status = 200) {
  body["schema_version"] = kApiSchemaVersion;
  return {status, std::move(body)};
}

nlohmann::json parse_body(const ApiRequest& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    auto j = nlohmann::json::parse(req.body);
    if (!j.is_object()) throw BadRequest("request body must be a JSON object");
    return j;
  } catch (const nlohmann::json::parse_error& e) {
    throw BadRequest(std::string("malformed JSON: ") + e.what());
  }
}

// "/prior/abc" with prefix "/prior/" -> "abc".
std::optional<std::string> tail_after(std::string_view path, std::string_view prefix) {
  if (path.size() <= prefix.size() || path.substr(0, prefix.size()) != prefix) return std::nullopt;
  const auto rest = path.substr(prefix.size());
  if (rest.find('/') != std::string_view::npos) return std::nullopt;
  return httplib::detail::decode_url(std::string(rest), false);
}

nlohmann::json points_json(const GridDensity& d, std::size_t max_points) {
  nlohmann::json pts = nlohmann::json::array();
  for (const auto& p : downsample(d, max_points)) pts.push_back({p.x, p.mass});
  return pts;
}

std::size_t max_points_param(const ApiRequest& req) {
  const auto it = req.query.find("max_points");
  if (it == req.query.end()) return 2000;
  try {
    const long v = std::stol(it->second);
    if (v < 1 || v > 2000) throw BadRequest("max_points must be in 1..2000");
    return static_cast<std::size_t>(v);
  } catch (const std::logic_error&) {
    throw BadRequest("max_points must be an integer");
  }
}

}  // namespace

struct CampaignService::Impl {
  std::mutex mu;  // Campaign is not thread-safe; one request at a time
  Campaign campaign;
  std::map<std::string, std::int64_t> checkouts;  // reviewer -> draw_id

  Impl(const std::filesystem::path& dir, Clock clock)
      : campaign(Campaign::open(dir, std::move(clock))) {}

  static std::string reviewer_of(const ApiRequest& req) {
    return req.reviewer.empty() ? std::string("anonymous") : req.reviewer;
  }

  ApiResponse get_campaign() { return ok(campaign.summary_json()); }

  ApiResponse next_draw(const ApiRequest& req) {
    const auto reviewer = reviewer_of(req);
    const auto pending = campaign.pending_draw_ids();
    // Drop checkouts whose draws have been judged meanwhile (by anyone).
    std::erase_if(checkouts, [&](const auto& kv) {
      return !std::binary_search(pending.begin(), pending.end(), kv.second);
    });

    std::optional<std::int64_t> chosen;
    if (const auto it = checkouts.find(reviewer); it != checkouts.end()) {
      chosen = it->second;
    } else {
      for (const auto id : pending) {
        const bool taken = std::any_of(checkouts.begin(), checkouts.end(),
                                       [id](const auto& kv) { return kv.second == id; });
        if (!taken) {
          chosen = id;
          break;
        }
      }
      if (chosen) checkouts[reviewer] = *chosen;
    }

    nlohmann::json body = {{"reviewer", reviewer},
                           {"pending_count", pending.size()},
                           {"state", to_string(campaign.state())}};
    if (!chosen) {
      body["draw"] = nullptr;
      return ok(std::move(body));
    }
    const auto& d = campaign.draw(*chosen);
    const auto& doc = campaign.corpus().find(d.doc_id);
    const auto text = sanitize_text(campaign.corpus().text(doc));
    const auto excerpt = first_lines(text, kReadingLines);
    body["draw"] = to_json(d);
    body["document"] = {{"doc_id", doc.doc_id},
                        {"line_count", doc.line_count},
                        {"truncated", doc.truncated},
                        {"head", excerpt.head},
                        {"has_more", excerpt.has_more}};
    if (req.query.contains("full")) body["document"]["text"] = text;
    return ok(std::move(body));
  }

  ApiResponse release(const ApiRequest& req) {
    const bool released = checkouts.erase(reviewer_of(req)) > 0;
    return ok({{"released", released}});
  }

  ApiResponse post_judgment(const ApiRequest& req) {
    const auto body = parse_body(req);
    if (!body.contains("draw_id") || !body["draw_id"].is_number_integer()) {
      throw BadRequest("draw_id (integer) is required");
    }
    if (!body.contains("verdict") || !body["verdict"].is_string()) {
      throw BadRequest("verdict (string) is required");
    }
    const auto draw_id = body["draw_id"].get<std::int64_t>();
    const auto verdict = verdict_from_string(body["verdict"].get<std::string>());
    std::optional<std::string> note;
    if (body.contains("note") && body["note"].is_string()) note = body["note"].get<std::string>();
    const bool correction = body.value("correction", false);
    const auto reviewer = reviewer_of(req);
    auto j = campaign.record_judgment(draw_id, verdict, reviewer, note, correction);
    if (const auto it = checkouts.find(reviewer); it != checkouts.end() && it->second == draw_id) {
      checkouts.erase(it);
    }
    return ok({{"judgment", to_json(j)},
               {"state", to_string(campaign.state())},
               {"pending_count", campaign.pending_draw_ids().size()}},
              201);
  }

  nlohmann::json prior_view(const std::string& stratum, std::size_t max_points) {
    const auto& elicited = campaign.elicited_prior(stratum);
    nlohmann::json j = {{"stratum", stratum}, {"kind", elicited ? "elicited" : "uniform"}};
    if (elicited) j["elicitation"] = to_json(*elicited);
    j["preview"] = {{"step", campaign.grid().step()},
                    {"points", points_json(campaign.prior_density(stratum), max_points)}};
    return j;
  }

  ApiResponse get_prior(const ApiRequest& req, const std::string& stratum) {
    return ok(prior_view(stratum, max_points_param(req)));
  }

  ApiResponse put_prior(const ApiRequest& req, const std::string& stratum) {
    const auto body = parse_body(req);
    campaign.partition().at(stratum);
    if (body.value("uniform", false)) {
      campaign.set_prior(stratum, std::nullopt);
    } else {
      if (!body.contains("points")) throw BadRequest("points or uniform:true is required");
      ElicitedPrior prior;
      try {
        prior = elicited_prior_from_json(body);
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::kValidation, std::string("points: ") + e.what());
      }
      if (prior.reviewer.empty()) prior.reviewer = reviewer_of(req);
      campaign.set_prior(stratum, prior);
    }
    return ok(prior_view(stratum, max_points_param(req)));
  }

  ApiResponse post_plan(const ApiRequest& req) {
    const auto body = parse_body(req);
    if (!body.contains("budget") || !body["budget"].is_number_integer()) {
      throw BadRequest("budget (integer) is required");
    }
    const auto budget = body["budget"].get<std::int64_t>();
    if (budget < 0) fail(ErrorCode::kInvalidArgument, "budget must be >= 0");
    return ok({{"plan", to_json(campaign.plan(budget))}, {"state", to_string(campaign.state())}});
  }

  ApiResponse post_finalize(const ApiRequest& req) {
    const auto body = parse_body(req);
    const double mass = body.value("mass", 0.95);
    const std::uint64_t seed =
        body.contains("seed") ? body["seed"].get<std::uint64_t>() : generate_seed();
    std::optional<std::int64_t> draws;
    if (body.contains("mc_draws")) draws = body["mc_draws"].get<std::int64_t>();
    const auto estimate = campaign.finalize(mass, seed, draws);
    return ok({{"estimate", to_json(estimate)},
               {"result_index", campaign.results().size()},
               {"state", to_string(campaign.state())}},
              201);
  }

  ApiResponse get_density(const ApiRequest& req, const std::string& which) {
    const auto max_points = max_points_param(req);
    double mass = 0.95;
    if (const auto it = req.query.find("mass"); it != req.query.end()) {
      try {
        mass = std::stod(it->second);
      } catch (const std::logic_error&) {
        throw BadRequest("mass must be a number");
      }
    }
    std::optional<GridDensity> d;
    std::string stratum;
    if (which == "combined") {
      d = campaign.latest_combined_density();
    } else {
      const auto it = req.query.find("stratum");
      if (it == req.query.end()) throw BadRequest("stratum query parameter is required");
      stratum = it->second;
      if (which == "prior") {
        d = campaign.prior_density(stratum);
      } else if (which == "presample-posterior") {
        d = campaign.presample_posterior(stratum);
      } else if (which == "posterior") {
        d = campaign.posterior(stratum);
      } else {
        fail(ErrorCode::kNotFound, fmt::format("unknown density '{}'", which));
      }
    }
    nlohmann::json body = {{"which", which},
                           {"step", d->grid().step()},
                           {"mean", corpstat::mean(*d)},
                           {"interval", to_json(credible_interval_exact(*d, mass))},
                           {"points", points_json(*d, max_points)}};
    body["stratum"] = stratum.empty() ? nlohmann::json() : nlohmann::json(stratum);
    return ok(std::move(body));
  }

  ApiResponse route(const ApiRequest& req) {
    const auto& m = req.method;
    const auto& p = req.path;
    if (p == "/campaign" && m == "GET") return get_campaign();
    if (p == "/next-draw" && m == "GET") return next_draw(req);
    if (p == "/next-draw" && m == "DELETE") return release(req);
    if (p == "/judgment" && m == "POST") return post_judgment(req);
    if (p == "/plan" && m == "POST") return post_plan(req);
    if (p == "/finalize" && m == "POST") return post_finalize(req);
    if (p == "/report" && m == "GET") return ok(render_json_report(campaign));
    if (auto s = tail_after(p, "/prior/")) {
      if (m == "GET") return get_prior(req, *s);
      if (m == "PUT") return put_prior(req, *s);
      return error_response(405, "method_not_allowed", m + " " + p);
    }
    if (auto w = tail_after(p, "/density/"); w && m == "GET") return get_density(req, *w);
    return error_response(404, "not_found", fmt::format("no endpoint {} {}", m, p));
  }
};

CampaignService::CampaignService(const std::filesystem::path& dir, Clock clock)
    : impl_(std::make_unique<Impl>(dir, std::move(clock))) {}

CampaignService::~CampaignService() = default;

ApiResponse CampaignService::handle(const ApiRequest& req) {
  std::lock_guard lock(impl_->mu);
  try {
    impl_->campaign.refresh();
    return impl_->route(req);
  } catch (const PendingJudgmentsError& e) {
    auto r = error_response(409, to_string(e.code()), e.what());
    r.body["error"]["pending_draw_ids"] = e.pending_draw_ids();
    return r;
  } catch (const Error& e) {
    return error_response(status_for(e.code()), to_string(e.code()), e.what());
  } catch (const BadRequest& e) {
    return error_response(400, "bad_request", e.what());
  } catch (const nlohmann::json::exception& e) {
    return error_response(400, "bad_request", e.what());
  }
}

// ---------------------------------------------------------------------------

struct ApiServer::Impl {
  CampaignService& service;
  ServerOptions options;
  httplib::Server server;
  int port = -1;

  Impl(CampaignService& s, ServerOptions o) : service(s), options(std::move(o)) {
    auto adapter = [this](const httplib::Request& hreq, httplib::Response& hres) {
      ApiRequest req;
      req.method = hreq.method;
      req.path = hreq.path;
      for (const auto& [k, v] : hreq.params) req.query[k] = v;
      req.reviewer = hreq.get_header_value("X-Reviewer");
      req.body = hreq.body;
      const auto res = service.handle(req);
      hres.status = res.status;
      hres.set_content(dump_json(res.body), "application/json");
    };
    const char* any = R"(/.*)";
    server.Get(any, adapter);
    server.Post(any, adapter);
    server.Put(any, adapter);
    server.Delete(any, adapter);
  }
};

ApiServer::ApiServer(CampaignService& service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {}

ApiServer::~ApiServer() { stop(); }

int ApiServer::bind() {
  auto& o = impl_->options;
  if (!o.static_dir.empty() && !impl_->server.set_mount_point("/ui", o.static_dir.string())) {
    fail(ErrorCode::kIo, fmt::format("cannot serve assets from {}", o.static_dir.string()));
  }
  const int port = o.port == 0 ? impl_->server.bind_to_any_port(o.host)
                               : (impl_->server.bind_to_port(o.host, o.port) ? o.port : -1);
  if (port < 0) fail(ErrorCode::kIo, fmt::format("cannot bind {}:{}", o.host, o.port));
  impl_->port = port;
  return port;
}

void ApiServer::listen() {
  if (impl_->port < 0) fail(ErrorCode::kState, "bind() before listen()");
  impl_->server.listen_after_bind();
}

void ApiServer::stop() {
  if (impl_->server.is_running()) impl_->server.stop();
}

}  // namespace corpstat
