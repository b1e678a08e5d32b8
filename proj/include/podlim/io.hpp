#pragma once

#include <charconv>
#include <cmath>
#include <fstream>
#include <string>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "podlim/errors.hpp"
#include "podlim/grid_sim.hpp"
#include "podlim/rational.hpp"
#include "podlim/state_space.hpp"

namespace podlim::io {

/// Shortest decimal that parses back to the same double.
inline std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  if (x == 0.0) return "0";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, x);
  if (r.ec != std::errc()) throw NumericError("format_double: conversion failed");
  return std::string(buf, r.ptr);
}

/// Column-oriented table rendered as CSV with LF line endings; columns keep insertion order.
class CsvTable {
 public:
  CsvTable& add(std::string name, std::vector<double> values) {
    std::vector<std::string> cells;
    cells.reserve(values.size());
    for (double v : values) cells.push_back(format_double(v));
    return add_text(std::move(name), std::move(cells));
  }
  CsvTable& add_text(std::string name, std::vector<std::string> cells) {
    if (!cols_.empty() && cells.size() != rows())
      throw DimensionError("csv: column '" + name + "' has a different length");
    cols_.emplace_back(std::move(name), std::move(cells));
    return *this;
  }
  std::size_t rows() const { return cols_.empty() ? 0 : cols_.front().second.size(); }

  std::string str() const {
    std::string out;
    for (std::size_t c = 0; c < cols_.size(); ++c) out += (c ? "," : "") + cols_[c].first;
    out += '\n';
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t c = 0; c < cols_.size(); ++c) {
        if (c) out += ',';
        out += cols_[c].second[r];
      }
      out += '\n';
    }
    return out;
  }

 private:
  std::vector<std::pair<std::string, std::vector<std::string>>> cols_;
};

inline std::string trajectory_csv(const grid::Trajectory& tr) {
  CsvTable t;
  t.add("t", tr.time);
  for (const auto& [k, v] : tr.signals) t.add(k, v);
  return t.str();
}

inline nlohmann::json trajectory_metadata(const grid::Trajectory& tr) {
  nlohmann::json j;
  j["dt"] = tr.dt;
  j["solver"] = tr.solver;
  j["model_hash"] = tr.model_hash;
  j["separated"] = tr.separated;
  j["t_separation"] = tr.separated ? nlohmann::json(tr.t_separation) : nlohmann::json(nullptr);
  j["samples"] = tr.time.size();
  return j;
}

// JSON forms: matrices as arrays of rows, polynomials as ascending coefficients.

inline nlohmann::json to_json(const Mat& M) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < M.rows(); ++i) {
    nlohmann::json r = nlohmann::json::array();
    for (Eigen::Index j = 0; j < M.cols(); ++j) r.push_back(M(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

inline Mat matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw ConfigError("matrix: expected " + std::to_string(rows) + " rows");
  Mat M(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& r = j[static_cast<std::size_t>(i)];
    if (!r.is_array() || static_cast<Eigen::Index>(r.size()) != cols)
      throw ConfigError("matrix: row " + std::to_string(i) + " must have " + std::to_string(cols) + " entries");
    for (Eigen::Index k = 0; k < cols; ++k) M(i, k) = r[static_cast<std::size_t>(k)].get<double>();
  }
  return M;
}

inline nlohmann::json to_json(const StateSpace& s) {
  return {{"A", to_json(s.A)}, {"B", to_json(s.B)}, {"C", to_json(s.C)}, {"D", to_json(s.D)},
          {"input_labels", s.input_labels}, {"output_labels", s.output_labels}};
}

inline StateSpace state_space_from_json(const nlohmann::json& j) {
  try {
    const auto n = static_cast<Eigen::Index>(j.at("A").size());
    const auto m = static_cast<Eigen::Index>(j.at("input_labels").size());
    const auto p = static_cast<Eigen::Index>(j.at("output_labels").size());
    return {matrix_from_json(j.at("A"), n, n), matrix_from_json(j.at("B"), n, m), matrix_from_json(j.at("C"), p, n),
            matrix_from_json(j.at("D"), p, m), j.at("input_labels").get<std::vector<std::string>>(),
            j.at("output_labels").get<std::vector<std::string>>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("state space json: ") + e.what());
  }
}

inline nlohmann::json to_json(const RationalTF& tf) {
  return {{"num", tf.num().coeffs()}, {"den", tf.den().coeffs()}};
}

inline RationalTF rational_from_json(const nlohmann::json& j) {
  try {
    return {Polynomial(j.at("num").get<std::vector<double>>()), Polynomial(j.at("den").get<std::vector<double>>())};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("transfer function json: ") + e.what());
  }
}

inline void write_text(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw ConfigError("cannot write '" + path + "'");
  f << content;
  if (!f) throw ConfigError("write failed for '" + path + "'");
}

}  // namespace podlim::io
