#pragma once

#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "voie/errors.hpp"
#include "voie/population.hpp"

namespace voie {

/// Columnar table format: a comma-separated header naming the stored paths
/// (y1_c, y1_v1, y1_v2, y2_cc, y2_cv2, y2_v1v2, optionally y2_v1c, y2_cv1 and
/// extra variant columns y1_<label>), then one row per unit.
inline PotentialOutcomeTable load_table(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw parse_error("table: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();

  std::vector<std::string> names;
  {
    std::istringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) names.push_back(field);
  }

  std::map<std::string, Column> cols;
  std::vector<std::string> variant_order;
  for (const std::string& n : names) {
    if (cols.count(n)) throw parse_error("table: duplicate column " + n);
    cols[n];
    if (n.rfind("y1_", 0) == 0 && n != "y1_c" && n != "y1_v2") {
      variant_order.push_back(n.substr(3));
    }
  }

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::istringstream ss(line);
    std::string field;
    std::size_t k = 0;
    while (std::getline(ss, field, ',')) {
      if (k >= names.size()) break;
      try {
        cols[names[k]].push_back(std::stod(field));
      } catch (const std::exception&) {
        throw parse_error("table: bad value '" + field + "' at line " +
                          std::to_string(lineno));
      }
      ++k;
    }
    if (k != names.size()) {
      throw parse_error("table: line " + std::to_string(lineno) + " has " +
                        std::to_string(k) + " fields, expected " +
                        std::to_string(names.size()));
    }
  }

  auto take = [&](const std::string& n) -> std::optional<Column> {
    auto it = cols.find(n);
    if (it == cols.end()) return std::nullopt;
    return std::move(it->second);
  };

  PotentialOutcomeTable t;
  auto y1c = take("y1_c");
  auto y2cc = take("y2_cc");
  if (!y1c || !y2cc || variant_order.empty()) {
    throw parse_error("table: columns y1_c, y2_cc and at least one variant "
                      "column are required");
  }
  t.y1_c = std::move(*y1c);
  t.y2_cc = std::move(*y2cc);
  t.variant_labels = variant_order;
  t.y1_variant.clear();
  for (const std::string& label : variant_order) {
    t.y1_variant.push_back(std::move(cols["y1_" + label]));
  }
  t.y1_v2 = take("y1_v2");
  t.y2_cv2 = take("y2_cv2");
  t.y2_v1v2 = take("y2_v1v2");
  t.y2_v1c = take("y2_v1c");
  t.y2_cv1 = take("y2_cv1");
  t.validate();
  return t;
}

inline PotentialOutcomeTable load_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw parse_error("cannot open '" + path + "'");
  return load_table(in);
}

inline void write_table(const PotentialOutcomeTable& t, std::ostream& out) {
  out.precision(17);
  out << "y1_c";
  for (const std::string& label : t.variant_labels) out << ",y1_" << label;
  if (t.y1_v2) out << ",y1_v2";
  out << ",y2_cc";
  if (t.y2_cv2) out << ",y2_cv2";
  if (t.y2_v1v2) out << ",y2_v1v2";
  if (t.y2_v1c) out << ",y2_v1c";
  if (t.y2_cv1) out << ",y2_cv1";
  out << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    out << t.y1_c[i];
    for (const Column& col : t.y1_variant) out << ',' << col[i];
    if (t.y1_v2) out << ',' << (*t.y1_v2)[i];
    out << ',' << t.y2_cc[i];
    if (t.y2_cv2) out << ',' << (*t.y2_cv2)[i];
    if (t.y2_v1v2) out << ',' << (*t.y2_v1v2)[i];
    if (t.y2_v1c) out << ',' << (*t.y2_v1c)[i];
    if (t.y2_cv1) out << ',' << (*t.y2_cv1)[i];
    out << '\n';
  }
}

}  // namespace voie
