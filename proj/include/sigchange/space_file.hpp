#pragma once

// JSON space files:
//   {"name": str, "dim": m, "alpha": a, "domain": [[lo, hi], ...],
//    "metric": [[expr, ...], ...], "fields": {name: [expr, ...]},
//    "sigma": expr (optional), "notes": str (optional)}
// Expressions are in x1..xm. JSON syntax errors carry the byte offset.

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sigchange/catalog.hpp"
#include "sigchange/errors.hpp"
#include "sigchange/metric.hpp"

namespace sigchange {

namespace space_file_detail {

using nlohmann::json;

inline const json& require(const json& doc, const char* key) {
  const auto it = doc.find(key);
  if (it == doc.end()) throw SchemaError(std::string("missing required key \"") + key + "\"");
  return *it;
}

inline std::string string_at(const json& v, const std::string& where) {
  if (!v.is_string()) throw SchemaError(where + " must be a string");
  return v.get<std::string>();
}

inline double number_at(const json& v, const std::string& where) {
  if (!v.is_number()) throw SchemaError(where + " must be a number");
  return v.get<double>();
}

inline Expression expression_at(const json& v, const std::vector<std::string>& names, const std::string& where) {
  const std::string text = string_at(v, where);
  try {
    return Expression::parse(text, names);
  } catch (const ParseError& e) {
    throw SchemaError(where + ": " + e.what());
  }
}

inline std::vector<Expression> expression_list(const json& v, std::size_t m, const std::vector<std::string>& names,
                                               const std::string& where) {
  if (!v.is_array() || v.size() != m) {
    throw SchemaError(where + " must be an array of " + std::to_string(m) + " expressions");
  }
  std::vector<Expression> out;
  for (std::size_t i = 0; i < m; ++i) out.push_back(expression_at(v[i], names, where + "[" + std::to_string(i) + "]"));
  return out;
}

}  // namespace space_file_detail

/// Parses a space document; throws SyntaxError (with byte offset) for
/// malformed JSON and SchemaError for well-formed documents that do not
/// describe a valid space.
inline SpaceDescriptor parse_space_json(const std::string& text) {
  using space_file_detail::json;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw SyntaxError(e.byte == 0 ? 0 : e.byte - 1, {}, e.what());
  }
  if (!doc.is_object()) throw SchemaError("space document must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    static const std::vector<std::string> known{"name", "dim", "alpha", "domain", "metric", "fields", "sigma", "notes"};
    if (std::find(known.begin(), known.end(), key) == known.end()) throw SchemaError("unknown key \"" + key + "\"");
  }
  const std::string name = space_file_detail::string_at(space_file_detail::require(doc, "name"), "name");
  const json& dim = space_file_detail::require(doc, "dim");
  if (!dim.is_number_integer() || dim.get<long long>() < 2) throw SchemaError("dim must be an integer >= 2");
  const auto m = static_cast<std::size_t>(dim.get<long long>());
  const auto names = coordinate_names(m);
  const double alpha = space_file_detail::number_at(space_file_detail::require(doc, "alpha"), "alpha");

  const json& domain = space_file_detail::require(doc, "domain");
  if (!domain.is_array() || domain.size() != m) throw SchemaError("domain must list " + std::to_string(m) + " intervals");
  Box box;
  for (std::size_t i = 0; i < m; ++i) {
    const json& iv = domain[i];
    const std::string where = "domain[" + std::to_string(i) + "]";
    if (!iv.is_array() || iv.size() != 2) throw SchemaError(where + " must be [lo, hi]");
    box.bounds.emplace_back(space_file_detail::number_at(iv[0], where), space_file_detail::number_at(iv[1], where));
  }

  const json& metric = space_file_detail::require(doc, "metric");
  if (!metric.is_array() || metric.size() != m) throw SchemaError("metric must have " + std::to_string(m) + " rows");
  std::vector<std::vector<Expression>> entries;
  for (std::size_t a = 0; a < m; ++a) {
    entries.push_back(space_file_detail::expression_list(metric[a], m, names, "metric[" + std::to_string(a) + "]"));
  }
  std::optional<Expression> sigma;
  if (const auto it = doc.find("sigma"); it != doc.end() && !it->is_null()) {
    sigma = space_file_detail::expression_at(*it, names, "sigma");
  }
  std::optional<MetricField> metric_field;
  try {
    metric_field.emplace(alpha, std::move(entries), std::move(box), sigma);
  } catch (const BadParams& e) {
    throw SchemaError(e.what());
  }
  SpaceDescriptor s{name, std::move(*metric_field), {}, sigma, ""};
  if (const auto it = doc.find("fields"); it != doc.end()) {
    if (!it->is_object()) throw SchemaError("fields must be an object");
    for (const auto& [key, value] : it->items()) {
      s.fields.emplace(key, VectorField(space_file_detail::expression_list(value, m, names, "fields." + key)));
    }
  }
  if (const auto it = doc.find("notes"); it != doc.end()) s.notes = space_file_detail::string_at(*it, "notes");
  return s;
}

inline SpaceDescriptor load_space_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw SchemaError("cannot open space file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_space_json(buf.str());
}

/// Document for a descriptor; keys in schema order.
inline nlohmann::ordered_json space_to_json(const SpaceDescriptor& s) {
  nlohmann::ordered_json doc;
  const MetricField& M = s.metric;
  doc["name"] = s.name;
  doc["dim"] = M.dim();
  doc["alpha"] = M.alpha();
  doc["domain"] = nlohmann::ordered_json::array();
  for (const auto& [lo, hi] : M.domain().bounds) doc["domain"].push_back({lo, hi});
  doc["metric"] = nlohmann::ordered_json::array();
  for (std::size_t a = 0; a < M.dim(); ++a) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t b = 0; b < M.dim(); ++b) row.push_back(M.entry(a, b).to_string());
    doc["metric"].push_back(row);
  }
  doc["fields"] = nlohmann::ordered_json::object();
  for (const auto& [key, field] : s.fields) {
    auto comps = nlohmann::ordered_json::array();
    for (const auto& c : field.components()) comps.push_back(c.to_string());
    doc["fields"][key] = comps;
  }
  if (s.sigma) doc["sigma"] = s.sigma->to_string();
  if (!s.notes.empty()) doc["notes"] = s.notes;
  return doc;
}

}  // namespace sigchange
