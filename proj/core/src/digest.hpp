#pragma once

#include <string>
#include <string_view>

namespace skbf::detail {

/// Lowercase hex SHA-256 of `data`.
std::string sha256_hex(std::string_view data);

}  // namespace skbf::detail
