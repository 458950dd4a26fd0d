#pragma once

// Text formats: headerless CSV matrices, comma-separated vectors and JSON
// system files {"A": [[...]], "B": [[...]], "C": [[...]]}.

#include <cerrno>
#include <cmath>
#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mecontrol/sysmodel.hpp"

namespace mecontrol {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline double parse_real(std::string_view tok) {
  tok = trim(tok);
  if (tok.empty()) throw InvalidInput("empty numeric field");
  // strtod accepts inf/nan spellings, which are rejected below.
  const std::string s(tok);
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size()) {
    throw InvalidInput("not a number: '" + s + "'");
  }
  if (!std::isfinite(v)) throw InvalidInput("non-finite value: '" + s + "'");
  return v;
}

inline std::vector<double> split_reals(std::string_view line) {
  std::vector<double> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(parse_real(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

/// Shortest representation that round-trips a double exactly.
inline std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline Vector parse_vector(std::string_view text) {
  const auto vals = detail::split_reals(detail::trim(text));
  return Eigen::Map<const Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

inline Matrix parse_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (detail::trim(line).empty()) continue;
    rows.push_back(detail::split_reals(line));
    if (rows.back().size() != rows.front().size()) {
      throw InvalidInput("ragged CSV row " + std::to_string(rows.size()));
    }
  }
  if (rows.empty()) throw InvalidInput("empty CSV");
  Matrix m(rows.size(), rows.front().size());
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

inline Matrix read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  try {
    return parse_csv(in);
  } catch (const InvalidInput& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
}

inline void write_csv(std::ostream& out, const Eigen::Ref<const Matrix>& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_real(m(i, j));
    }
    out << '\n';
  }
}

inline void write_csv(const std::filesystem::path& path,
                      const Eigen::Ref<const Matrix>& m) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  write_csv(out, m);
}

inline nlohmann::json matrix_to_json(const Eigen::Ref<const Matrix>& m) {
  auto rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    auto row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json vector_to_json(const Eigen::Ref<const Vector>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

inline Matrix matrix_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw InvalidInput("\"" + key + "\" must be a non-empty array of arrays");
  }
  const std::size_t cols = j.front().size();
  Matrix m(j.size(), cols);
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw InvalidInput("\"" + key + "\" has ragged rows");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      if (!j[i][c].is_number()) throw InvalidInput("\"" + key + "\" has a non-number");
      m(i, c) = j[i][c].get<double>();
    }
  }
  return m;
}

inline Vector vector_from_json(const nlohmann::json& j, const std::string& key) {
  if (!j.is_array()) throw InvalidInput("\"" + key + "\" must be an array");
  Vector v(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw InvalidInput("\"" + key + "\" has a non-number");
    v(i) = j[i].get<double>();
  }
  return v;
}

inline nlohmann::json system_to_json(const LtiSystem& sys) {
  nlohmann::json j;
  j["A"] = matrix_to_json(sys.A());
  j["B"] = matrix_to_json(sys.B());
  if (sys.C()) j["C"] = matrix_to_json(*sys.C());
  return j;
}

inline LtiSystem system_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("A") || !j.contains("B")) {
    throw InvalidInput("system JSON needs keys \"A\" and \"B\"");
  }
  std::optional<Matrix> c;
  if (j.contains("C")) c = matrix_from_json(j["C"], "C");
  return LtiSystem(matrix_from_json(j["A"], "A"), matrix_from_json(j["B"], "B"),
                   std::move(c));
}

inline LtiSystem read_system(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInput(path.string() + ": " + e.what());
  }
  return system_from_json(j);
}

inline void write_system(const std::filesystem::path& path, const LtiSystem& sys) {
  std::ofstream out(path);
  if (!out) throw InvalidInput("cannot write " + path.string());
  out << system_to_json(sys).dump(2) << '\n';
}

}  // namespace mecontrol
