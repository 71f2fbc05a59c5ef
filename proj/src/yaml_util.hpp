#pragma once

#include <yaml-cpp/yaml.h>

#include <Eigen/Dense>
#include <string>

#include "netlqr/errors.hpp"
#include "netlqr/serialization.hpp"

namespace netlqr::detail {

inline std::string where(const YAML::Node& node) {
  return "line " + std::to_string(node.Mark().line + 1);
}

inline YAML::Node need(const YAML::Node& parent, const std::string& key) {
  YAML::Node n = parent[key];
  if (!n) throw ConfigError(where(parent) + ": missing field '" + key + "'");
  return n;
}

inline double read_number(const YAML::Node& node, const std::string& field) {
  if (!node.IsScalar()) throw ConfigError(where(node) + ": field '" + field + "' must be a number");
  try {
    return parse_double(node.Scalar());
  } catch (const ConfigError&) {
    throw ConfigError(where(node) + ": field '" + field + "' must be a number, got '" + node.Scalar() + "'");
  }
}

inline Eigen::MatrixXd read_matrix(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence())
    throw ConfigError(where(node) + ": field '" + field + "' must be a list of rows");
  const auto rows = static_cast<Eigen::Index>(node.size());
  Eigen::Index cols = -1;
  Eigen::MatrixXd m(0, 0);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const YAML::Node row = node[static_cast<std::size_t>(i)];
    if (!row.IsSequence())
      throw ConfigError(where(row) + ": field '" + field + "' row " + std::to_string(i + 1) + " is not a list");
    if (cols < 0) {
      cols = static_cast<Eigen::Index>(row.size());
      m.resize(rows, cols);
    } else if (static_cast<Eigen::Index>(row.size()) != cols) {
      throw ConfigError(where(row) + ": field '" + field + "' row " + std::to_string(i + 1) + " has " +
                        std::to_string(row.size()) + " entries, expected " + std::to_string(cols));
    }
    for (Eigen::Index j = 0; j < cols; ++j)
      m(i, j) = read_number(row[static_cast<std::size_t>(j)], field);
  }
  return m;
}

inline Eigen::VectorXd read_vector(const YAML::Node& node, const std::string& field) {
  if (!node.IsSequence()) throw ConfigError(where(node) + ": field '" + field + "' must be a list");
  Eigen::VectorXd v(static_cast<Eigen::Index>(node.size()));
  for (std::size_t i = 0; i < node.size(); ++i) v(static_cast<Eigen::Index>(i)) = read_number(node[i], field);
  return v;
}

inline std::size_t read_index(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<std::size_t>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(node) + ": field '" + field + "' must be a non-negative integer");
  }
}

inline long read_integer(const YAML::Node& node, const std::string& field) {
  try {
    return node.as<long>();
  } catch (const YAML::Exception&) {
    throw ConfigError(where(node) + ": field '" + field + "' must be an integer");
  }
}

}  // namespace netlqr::detail
