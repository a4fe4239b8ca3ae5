#pragma once

#include <xfit/data.hpp>
#include <xfit/dependence.hpp>

#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xfit {

// Compact, locale-independent float formatting used in every CSV we emit.
// 12 significant digits keeps files diffable while preserving estimates far
// below any tolerance used downstream.
inline std::string fmt_g(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << content;
  if (!f) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Minimal CSV reader for the files this tool writes: quoted fields with
// doubled quotes, no embedded newlines expected but handled inside quotes.
inline std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      row.push_back(std::move(field));
      field.clear();
      rows.push_back(std::move(row));
      row.clear();
    } else if (c != '\r') {
      field += c;
    }
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

// Dataset interchange: one CSV of units plus a JSON sidecar describing the
// dependence structure (cluster ids, edge list, or the series order m).
inline std::string table_csv(const ObservationTable& table) {
  std::string out = "unit_id";
  for (const auto& name : table.covariate_names) out += "," + csv_escape(name);
  out += ",A,Y\n";
  for (Eigen::Index i = 0; i < table.n(); ++i) {
    out += csv_escape(table.unit_ids[static_cast<std::size_t>(i)]);
    for (Eigen::Index j = 0; j < table.p(); ++j)
      out += "," + fmt_g(table.covariates(i, j));
    out += "," + fmt_g(table.treatment[i]) + "," + fmt_g(table.outcome[i]) + "\n";
  }
  return out;
}

inline nlohmann::ordered_json structure_json(const DependenceStructure& s) {
  nlohmann::ordered_json j;
  j["kind"] = s.kind_name();
  j["n"] = s.n();
  switch (s.kind()) {
    case DependenceStructure::Kind::independent:
      break;
    case DependenceStructure::Kind::one_way:
      j["row_ids"] = s.row_ids();
      break;
    case DependenceStructure::Kind::two_way:
      j["row_ids"] = s.row_ids();
      j["col_ids"] = s.col_ids();
      break;
    case DependenceStructure::Kind::network: {
      auto edges = nlohmann::ordered_json::array();
      const auto& adj = s.adjacency();
      for (std::size_t i = 0; i < adj.size(); ++i)
        for (int k : adj[i])
          if (static_cast<std::size_t>(k) > i)
            edges.push_back({i, k});
      j["edges"] = std::move(edges);
      break;
    }
    case DependenceStructure::Kind::time_series:
      j["m"] = s.m_order();
      break;
  }
  return j;
}

}  // namespace xfit
