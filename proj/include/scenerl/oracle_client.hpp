#pragma once

#include <optional>
#include <string>

#include "scenerl/config.hpp"

namespace scenerl {

// POST {endpoint}/answer with {"think": ..., "question": ...}; expects 200
// and {"answer": ...}. Retries with exponential backoff per the config;
// nullopt on network failure, timeout, non-200, or a malformed body.
std::optional<std::string> oracle_client_answer(const OracleConfig& cfg,
                                                const std::string& think,
                                                const std::string& question);

}  // namespace scenerl
