#include "http_json.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "skbf/errors.hpp"

namespace skbf::detail {

std::atomic<std::uint64_t>& http_request_counter() noexcept {
  static std::atomic<std::uint64_t> counter{0};
  return counter;
}

nlohmann::json post_json(const std::string& base_url, const std::string& path,
                         const std::string& api_key, const nlohmann::json& body,
                         std::chrono::seconds timeout) {
  http_request_counter().fetch_add(1);

  httplib::Client client(base_url);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Headers headers;
  if (!api_key.empty()) headers.emplace("Authorization", "Bearer " + api_key);

  auto result = client.Post(path, headers, body.dump(), "application/json");
  if (!result) {
    throw TransportError("request to " + base_url + path +
                         " failed: " + httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    throw TransportError("request to " + base_url + path + " returned HTTP " +
                         std::to_string(result->status));
  }
  try {
    return nlohmann::json::parse(result->body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError("unparsable reply from " + base_url + path + ": " + e.what());
  }
}

}  // namespace skbf::detail
