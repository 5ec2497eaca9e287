#pragma once

// RFC-4180 style CSV: quoted fields where needed, '.' decimal point and
// 17 significant digits in scientific notation.

#include <cstddef>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridrel/errors.hpp"

namespace gridrel::csv {

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.16e", v);
  return buf;
}

inline std::string quote(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    throw ConfigError("csv: no column '" + name + "'");
  }
};

class Writer {
 public:
  explicit Writer(std::vector<std::string> header) { row(header); }

  Writer& row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << quote(fields[i]);
    }
    out_ << "\r\n";
    return *this;
  }

  std::string str() const { return out_.str(); }

  void save(const std::string& path) const {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    f << out_.str();
    if (!f) throw ConfigError("write failed: " + path);
  }

 private:
  std::ostringstream out_;
};

/// Parses a whole document; the first record is the header. Accepts LF or
/// CRLF line ends and quoted fields containing separators or newlines.
inline Table parse(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
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
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      record.push_back(field);
      field.clear();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      record.push_back(field);
      records.push_back(record);
      record.clear();
      field.clear();
      field_started = false;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ConfigError("csv: unterminated quoted field");
  if (field_started || !field.empty()) {
    record.push_back(field);
    records.push_back(record);
  }
  if (records.empty()) throw ConfigError("csv: empty document");
  Table t;
  t.header = records.front();
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size())
      throw ConfigError("csv: record " + std::to_string(r) + " has " +
                        std::to_string(records[r].size()) + " fields, expected " +
                        std::to_string(t.header.size()));
    t.rows.push_back(records[r]);
  }
  return t;
}

inline Table read(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot read " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse(ss.str());
}

inline double to_number(const std::string& s) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ConfigError("csv: not a number: '" + s + "'");
  }
  if (used != s.size()) throw ConfigError("csv: not a number: '" + s + "'");
  return v;
}

/// Polytope file: row_label,b,w_1..w_n.
inline Writer polytope_writer(const Eigen::MatrixXd& W, const Eigen::VectorXd& b,
                              const std::vector<std::string>& labels) {
  std::vector<std::string> header{"row_label", "b"};
  for (Eigen::Index k = 0; k < W.cols(); ++k) header.push_back("w_" + std::to_string(k + 1));
  Writer w(header);
  for (Eigen::Index j = 0; j < W.rows(); ++j) {
    std::vector<std::string> row{labels.at(static_cast<std::size_t>(j)), format_number(b(j))};
    for (Eigen::Index k = 0; k < W.cols(); ++k) row.push_back(format_number(W(j, k)));
    w.row(row);
  }
  return w;
}

struct PolytopeTable {
  Eigen::MatrixXd W;
  Eigen::VectorXd b;
  std::vector<std::string> labels;
};

inline PolytopeTable parse_polytope(const Table& t) {
  if (t.header.size() < 3 || t.header[0] != "row_label" || t.header[1] != "b")
    throw ConfigError("polytope csv: expected header row_label,b,w_1,...");
  const auto n = static_cast<Eigen::Index>(t.header.size() - 2);
  PolytopeTable p;
  p.W.resize(static_cast<Eigen::Index>(t.rows.size()), n);
  p.b.resize(static_cast<Eigen::Index>(t.rows.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto j = static_cast<Eigen::Index>(r);
    p.labels.push_back(t.rows[r][0]);
    p.b(j) = to_number(t.rows[r][1]);
    for (Eigen::Index k = 0; k < n; ++k)
      p.W(j, k) = to_number(t.rows[r][static_cast<std::size_t>(k) + 2]);
  }
  return p;
}

}  // namespace gridrel::csv
