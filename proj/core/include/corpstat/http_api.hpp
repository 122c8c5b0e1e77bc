#pragma once

// JSON-over-HTTP front end for one campaign directory.
//
//   GET    /campaign                 summary: state, strata, tallies, allocation
//   GET    /next-draw[?full=1]       check out the next unjudged draw (X-Reviewer)
//   DELETE /next-draw                release the reviewer's checkout
//   POST   /judgment                 {draw_id, verdict, note?, correction?}
//   GET    /prior/{stratum}          elicitation plus splined preview
//   PUT    /prior/{stratum}          {points: [[x, likelihood], ...]} or {uniform: true}
//   POST   /plan                     {budget}
//   POST   /finalize                 {mass?, seed?, mc_draws?}
//   GET    /density/{which}?stratum= which: prior | presample-posterior | posterior | combined
//   GET    /report                   JSON report
//   GET    /ui/...                   static review UI assets, when configured
//
// Status codes: 400 malformed request, 404 unknown id, 409 state-machine
// violation or pending judgments, 422 invalid values.

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include <nlohmann/json.hpp>

#include "corpstat/campaign.hpp"

namespace corpstat {

inline constexpr int kApiSchemaVersion = 1;
inline constexpr std::size_t kReadingLines = 50;

struct ApiRequest {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string reviewer;  // X-Reviewer header; empty if absent
  std::string body;
};

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

// Socket-free request handling; the server below is a thin adapter.
class CampaignService {
 public:
  explicit CampaignService(const std::filesystem::path& campaign_dir,
                           Clock clock = default_clock());
  ~CampaignService();

  ApiResponse handle(const ApiRequest& request);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  // 0 picks a free port
  std::filesystem::path static_dir;  // optional UI assets mounted at /ui
};

class ApiServer {
 public:
  ApiServer(CampaignService& service, ServerOptions options);
  ~ApiServer();

  // Binds the socket and returns the port actually bound.
  int bind();
  // Serves until stop(); call bind() first.
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace corpstat
