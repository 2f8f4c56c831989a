#pragma once

#include <initializer_list>
#include <string>
#include <vector>

#include <json.hpp>

#include "omegaflow/common.hpp"

namespace omegaflow::jsonu {

using nlohmann::json;

inline const json& require(const json& j, const std::string& key, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  auto it = j.find(key);
  if (it == j.end()) throw SchemaError(ptr + "/" + key, "missing required key");
  return *it;
}

// Rejects keys outside the allowed set, pointing at the first offender.
inline void only_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& ptr) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* a : allowed) known = known || it.key() == a;
    if (!known) throw SchemaError(ptr + "/" + it.key(), "unknown key");
  }
}

inline const json* optional(const json& j, const std::string& key) {
  if (!j.is_object()) return nullptr;
  auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

// Accepts numbers and the strings "inf" / "-inf".
inline double number(const json& j, const std::string& ptr) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    auto s = j.get<std::string>();
    if (s == "inf" || s == "Infinity") return kInf;
    if (s == "-inf" || s == "-Infinity") return -kInf;
  }
  throw SchemaError(ptr, "expected a number");
}

inline double number_or(const json& j, const std::string& key, double dflt, const std::string& ptr) {
  auto* v = optional(j, key);
  return v ? number(*v, ptr + "/" + key) : dflt;
}

inline int integer(const json& j, const std::string& ptr) {
  if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  return j.get<int>();
}

inline std::string string(const json& j, const std::string& ptr) {
  if (!j.is_string()) throw SchemaError(ptr, "expected a string");
  return j.get<std::string>();
}

inline std::vector<double> numbers(const json& j, const std::string& ptr) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) out.push_back(number(j[i], ptr + "/" + std::to_string(i)));
  return out;
}

inline json number_to_json(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

}  // namespace omegaflow::jsonu
