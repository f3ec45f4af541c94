#pragma once

// Validator for the subset of JSON Schema used in schemas/: type, const,
// enum, required, properties, additionalProperties (false only), items,
// minItems, minimum.

#include <string>
#include <vector>

#include "json.hpp"

namespace schema {

using Json = nlohmann::ordered_json;

inline bool has_type(const Json& v, const std::string& t) {
  if (t == "object") return v.is_object();
  if (t == "array") return v.is_array();
  if (t == "string") return v.is_string();
  if (t == "boolean") return v.is_boolean();
  if (t == "null") return v.is_null();
  if (t == "integer") return v.is_number_integer() || v.is_number_unsigned();
  if (t == "number") return v.is_number();
  return false;
}

inline void validate(const Json& v, const Json& s, const std::string& at, std::vector<std::string>& problems) {
  if (s.contains("type")) {
    bool ok = false;
    if (s["type"].is_array()) {
      for (const auto& t : s["type"]) ok = ok || has_type(v, t.get<std::string>());
    } else {
      ok = has_type(v, s["type"].get<std::string>());
    }
    if (!ok) {
      problems.push_back(at + ": expected type " + s["type"].dump());
      return;
    }
  }
  if (s.contains("const") && v != s["const"]) problems.push_back(at + ": expected " + s["const"].dump());
  if (s.contains("enum")) {
    bool found = false;
    for (const auto& e : s["enum"]) found = found || e == v;
    if (!found) problems.push_back(at + ": " + v.dump() + " not in enum");
  }
  if (s.contains("minimum") && v.is_number() && v.get<double>() < s["minimum"].get<double>())
    problems.push_back(at + ": below minimum");
  if (v.is_object()) {
    if (s.contains("required"))
      for (const auto& r : s["required"])
        if (!v.contains(r.get<std::string>())) problems.push_back(at + ": missing " + r.get<std::string>());
    const Json props = s.value("properties", Json::object());
    for (const auto& [k, x] : v.items()) {
      if (props.contains(k))
        validate(x, props[k], at + "." + k, problems);
      else if (s.contains("additionalProperties") && s["additionalProperties"] == false)
        problems.push_back(at + ": unexpected key " + k);
    }
  }
  if (v.is_array()) {
    if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) problems.push_back(at + ": too few items");
    if (s.contains("items"))
      for (std::size_t i = 0; i < v.size(); ++i) validate(v[i], s["items"], at + "[" + std::to_string(i) + "]", problems);
  }
}

inline std::vector<std::string> validate(const Json& v, const Json& s) {
  std::vector<std::string> problems;
  validate(v, s, "$", problems);
  return problems;
}

}  // namespace schema
