// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

// Internal JSON helpers. Readers ignore unknown keys and reject missing ones.

#pragma once

#include <string>

#include "json.hpp"
#include "pdo/error.hpp"
#include "pdo/field.hpp"

namespace pdo::detail {

using json = nlohmann::json;

inline const json& require(const json& j, const char* key, const std::string& context) {
  if (!j.is_object() || !j.contains(key)) {
    throw ValidationError(context + ": missing required key '" + key + "'");
  }
  return j.at(key);
}

template <typename T>
T require_as(const json& j, const char* key, const std::string& context) {
  try {
    return require(j, key, context).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(context + ": key '" + key + "' has the wrong type (" + e.what() + ")");
  }
}

template <typename T>
T value_or(const json& j, const char* key, T fallback) {
  if (!j.is_object() || !j.contains(key) || j.at(key).is_null()) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("key '") + key + "' has the wrong type (" + e.what() + ")");
  }
}

json grid_to_json(const Grid& g);
Grid grid_from_json(const json& j, const std::string& context);

json stats_to_json(const NormStats& s);
NormStats stats_from_json(const json& j, const std::string& context);

json parse_json_text(const std::string& text, const std::string& context);

}  // namespace pdo::detail
