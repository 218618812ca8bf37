#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "gplan/errors.hpp"
#include "gplan/util.hpp"

namespace gplan {

using json = nlohmann::json;

// Returns a copy with every floating-point value rounded to `digits`
// significant digits. Integers and everything else pass through untouched.
inline json round_json(const json& j, int digits = 9) {
  switch (j.type()) {
    case json::value_t::number_float:
      return round_sig(j.get<double>(), digits);
    case json::value_t::array: {
      json out = json::array();
      for (const auto& el : j) out.push_back(round_json(el, digits));
      return out;
    }
    case json::value_t::object: {
      json out = json::object();
      for (auto it = j.begin(); it != j.end(); ++it) out[it.key()] = round_json(it.value(), digits);
      return out;
    }
    default:
      return j;
  }
}

// Canonical form used for all emitted JSON: keys sorted (nlohmann object
// order), floats rounded to nine significant digits.
inline std::string dump_canonical(const json& j, int indent = 2) {
  return round_json(j).dump(indent);
}

inline json parse_json(std::string_view text, const std::string& context) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(context + ": " + e.what());
  }
}

inline json read_json_file(const std::filesystem::path& path) {
  return parse_json(read_text_file(path), path.string());
}

inline void write_json_file(const std::filesystem::path& path, const json& j, int indent = 2) {
  write_text_file(path, dump_canonical(j, indent) + "\n");
}

}  // namespace gplan
