#include "scenerl/oracle_client.hpp"

#include <chrono>
#include <cmath>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace scenerl {

std::optional<std::string> oracle_client_answer(const OracleConfig& cfg,
                                                const std::string& think,
                                                const std::string& question) {
  if (cfg.endpoint.empty()) return std::nullopt;

  httplib::Client client(cfg.endpoint);
  const auto timeout = std::chrono::milliseconds(
      static_cast<long long>(cfg.timeoutSec * 1000.0));
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  const std::string body =
      nlohmann::json{{"think", think}, {"question", question}}.dump();

  for (int attempt = 1; attempt <= cfg.maxAttempts; ++attempt) {
    if (attempt > 1) {
      const double waitSec =
          cfg.backoffBaseSec * std::pow(2.0, attempt - 2);
      std::this_thread::sleep_for(
          std::chrono::milliseconds(static_cast<long long>(waitSec * 1000.0)));
    }
    httplib::Result res = client.Post("/answer", body, "application/json");
    if (!res || res->status != 200) continue;
    const nlohmann::json j =
        nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.contains("answer") || !j["answer"].is_string())
      return std::nullopt;  // malformed body is not retryable
    return j["answer"].get<std::string>();
  }
  return std::nullopt;
}

}  // namespace scenerl
