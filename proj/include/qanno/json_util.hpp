#pragma once

#include <cstdint>

#include <json.hpp>

namespace qanno {

// Integers built in C++ are signed even when positive; parsed text yields unsigned.
inline bool is_non_negative_integer(const nlohmann::json& v) {
  return v.is_number_unsigned() || (v.is_number_integer() && v.get<std::int64_t>() >= 0);
}

}  // namespace qanno
