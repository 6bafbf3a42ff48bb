// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 The SeqConv Authors

#pragma once

// Strict accessors over nlohmann::json objects: every key must be known,
// every value must have the expected type, errors carry JSON pointers.

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "seqconv/errors.hpp"

namespace seqconv::detail {

using nlohmann::json;

inline const char* type_label(const json& j) { return j.type_name(); }

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path, std::initializer_list<const char*> allowed)
      : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigError(path_.empty() ? "/" : path_, std::string("expected an object, got ") + type_label(j));
    for (const auto& [key, _] : j.items()) {
      bool known = false;
      for (const char* a : allowed) known = known || key == a;
      if (!known) {
        std::string list;
        for (const char* a : allowed) list += std::string(list.empty() ? "" : ", ") + a;
        throw ConfigError(child(key), "unknown key (allowed: " + list + ")");
      }
    }
  }

  std::string child(const std::string& key) const { return path_ + "/" + key; }
  bool has(const char* key) const { return j_.contains(key); }
  const json& at(const char* key) const {
    if (!j_.contains(key)) throw ConfigError(child(key), "required key missing");
    return j_.at(key);
  }

  std::string string(const char* key, std::string fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) throw ConfigError(child(key), std::string("expected a string, got ") + type_label(v));
    return v.get<std::string>();
  }

  bool boolean(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) throw ConfigError(child(key), std::string("expected a boolean, got ") + type_label(v));
    return v.get<bool>();
  }

  double number(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number()) throw ConfigError(child(key), std::string("expected a number, got ") + type_label(v));
    return v.get<double>();
  }

  long long integer(const char* key, long long fallback, long long min = 0) const {
    if (!has(key)) return fallback;
    return integer_value(j_.at(key), child(key), min);
  }

  static long long integer_value(const json& v, const std::string& path, long long min = 0) {
    if (!v.is_number_integer()) throw ConfigError(path, std::string("expected an integer, got ") + type_label(v));
    const long long x = v.get<long long>();
    if (x < min) throw ConfigError(path, "must be >= " + std::to_string(min) + ", got " + std::to_string(x));
    return x;
  }

 private:
  const json& j_;
  std::string path_;
};

template <typename E>
E parse_enum(const std::string& path, const std::string& text, std::initializer_list<std::pair<const char*, E>> options) {
  std::string list;
  for (const auto& [name, value] : options) {
    if (text == name) return value;
    list += std::string(list.empty() ? "" : ", ") + name;
  }
  throw ConfigError(path, "unknown value '" + text + "' (expected one of: " + list + ")");
}

}  // namespace seqconv::detail
