// jsonio.hpp — strict JSON access helpers. All file formats reject unknown
// keys and report the offending context, so hand-authored fixtures fail loud.

#pragma once

#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"
#include "scbu/errors.hpp"

namespace scbu {

// Insertion-ordered JSON keeps serialized field order stable, which the
// round-trip and byte-identity tests rely on.
using ojson = nlohmann::ordered_json;

template <class E = SchemaError>
const ojson& require_field(const ojson& obj, std::string_view key, const std::string& ctx) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw E(ctx + ": missing field '" + std::string(key) + "'");
  }
  return *it;
}

template <class E = SchemaError>
double require_double(const ojson& obj, std::string_view key, const std::string& ctx) {
  const ojson& v = require_field<E>(obj, key, ctx);
  if (!v.is_number()) throw E(ctx + ": field '" + std::string(key) + "' must be a number");
  return v.get<double>();
}

template <class E = SchemaError>
long long require_int(const ojson& obj, std::string_view key, const std::string& ctx) {
  const ojson& v = require_field<E>(obj, key, ctx);
  if (!v.is_number_integer()) throw E(ctx + ": field '" + std::string(key) + "' must be an integer");
  return v.get<long long>();
}

template <class E = SchemaError>
std::string require_string(const ojson& obj, std::string_view key, const std::string& ctx) {
  const ojson& v = require_field<E>(obj, key, ctx);
  if (!v.is_string()) throw E(ctx + ": field '" + std::string(key) + "' must be a string");
  return v.get<std::string>();
}

template <class E = SchemaError>
bool require_bool(const ojson& obj, std::string_view key, const std::string& ctx) {
  const ojson& v = require_field<E>(obj, key, ctx);
  if (!v.is_boolean()) throw E(ctx + ": field '" + std::string(key) + "' must be a boolean");
  return v.get<bool>();
}

template <class E = SchemaError>
void reject_unknown_keys(const ojson& obj, std::initializer_list<std::string_view> allowed,
                         const std::string& ctx) {
  if (!obj.is_object()) throw E(ctx + ": expected an object");
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (auto a : allowed) {
      if (key == a) {
        known = true;
        break;
      }
    }
    if (!known) throw E(ctx + ": unknown key '" + key + "'");
  }
}

// Major-version gate for the `schema_version` field ("1.x" accepted).
template <class E = SchemaError>
void check_schema_version(const ojson& obj, const std::string& ctx) {
  std::string version = require_string<E>(obj, "schema_version", ctx);
  auto dot = version.find('.');
  std::string major = dot == std::string::npos ? version : version.substr(0, dot);
  if (major != "1") {
    throw E(ctx + ": unsupported schema_version '" + version + "' (supported major: 1)");
  }
}

}  // namespace scbu
