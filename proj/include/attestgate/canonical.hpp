#pragma once

#include <string>

#include <json.hpp>

#include "attestgate/bytes.hpp"

namespace attestgate {

using Json = nlohmann::json;

/// Canonical form: compact JSON, object keys in ascending bytewise order,
/// byte fields already rendered as lowercase hex by the model converters.
/// nlohmann::json stores objects in a std::map keyed by std::string, whose
/// ordering is char_traits<char>::compare (unsigned bytewise).
inline std::string canonical_encode(const Json& value) {
  return value.dump(-1, ' ', false, Json::error_handler_t::strict);
}

inline Bytes canonical_bytes(const Json& value) { return to_bytes(canonical_encode(value)); }

}  // namespace attestgate
