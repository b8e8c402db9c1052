#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <string>

namespace skbf::detail {

/// Every outbound HTTP request made by the library increments this.
std::atomic<std::uint64_t>& http_request_counter() noexcept;

/// POSTs a JSON body with an optional bearer token and returns the parsed
/// JSON reply. Throws TransportError on connection failure, non-2xx status
/// or an unparsable body.
nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const std::string& api_key, const nlohmann::json& body,
                         std::chrono::seconds timeout);

}  // namespace skbf::detail
