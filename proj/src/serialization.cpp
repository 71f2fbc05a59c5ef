#include "netlqr/serialization.hpp"

#include <yaml-cpp/yaml.h>

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

#include "yaml_util.hpp"

namespace netlqr {

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
  double v = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (first != last && *first == '+') ++first;
  auto res = std::from_chars(first, last, v);
  if (res.ec != std::errc() || res.ptr != last)
    throw ConfigError("not a number: '" + text + "'");
  return v;
}

namespace {

using detail::need;
using detail::read_index;
using detail::read_matrix;

void emit_matrix(YAML::Emitter& out, const Eigen::MatrixXd& m) {
  out << YAML::Flow << YAML::BeginSeq;
  for (Index i = 0; i < m.rows(); ++i) {
    out << YAML::Flow << YAML::BeginSeq;
    for (Index j = 0; j < m.cols(); ++j) out << format_double(m(i, j));
    out << YAML::EndSeq;
  }
  out << YAML::EndSeq;
}

YAML::Node load(std::istream& is) {
  try {
    return YAML::Load(is);
  } catch (const YAML::Exception& e) {
    throw ConfigError(std::string("malformed document: ") + e.what());
  }
}

}  // namespace

void write_policy(std::ostream& os, const PartitionPolicy& pol) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << "partition_policy";
  out << YAML::Key << "modes" << YAML::Value << pol.num_modes;
  out << YAML::Key << "horizon" << YAML::Value << pol.horizon();
  out << YAML::Key << "terminal" << YAML::Value;
  emit_matrix(out, pol.terminal);
  out << YAML::Key << "steps" << YAML::Value << YAML::BeginSeq;
  for (std::size_t k = 0; k < pol.steps.size(); ++k) {
    out << YAML::BeginMap << YAML::Key << "k" << YAML::Value << k;
    out << YAML::Key << "regions" << YAML::Value << YAML::BeginSeq;
    for (const auto& r : pol.steps[k]) {
      out << YAML::BeginMap;
      out << YAML::Key << "action" << YAML::Value << r.action;
      out << YAML::Key << "candidate" << YAML::Value << r.candidate;
      out << YAML::Key << "optimal" << YAML::Value << r.optimal;
      out << YAML::Key << "successors" << YAML::Value << YAML::Flow << YAML::BeginSeq;
      for (auto s : r.successors) out << s;
      out << YAML::EndSeq;
      out << YAML::Key << "gain" << YAML::Value;
      emit_matrix(out, r.gain);
      out << YAML::Key << "value" << YAML::Value;
      emit_matrix(out, r.value);
      out << YAML::Key << "constraints" << YAML::Value << YAML::BeginSeq;
      for (const auto& c : r.constraints) {
        out << YAML::BeginMap;
        out << YAML::Key << "relation" << YAML::Value << YAML::DoubleQuoted << relation_symbol(c.relation);
        out << YAML::Key << "Y" << YAML::Value;
        emit_matrix(out, c.Y);
        out << YAML::EndMap;
      }
      out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq << YAML::EndMap;
  os << out.c_str() << '\n';
}

PartitionPolicy read_policy(std::istream& is) {
  const YAML::Node root = load(is);
  if (!root.IsMap() || root["kind"].as<std::string>("") != "partition_policy")
    throw ConfigError("document is not a partition policy");
  PartitionPolicy pol;
  pol.num_modes = read_index(need(root, "modes"), "modes");
  pol.terminal = read_matrix(need(root, "terminal"), "terminal");
  const YAML::Node steps = need(root, "steps");
  for (const auto& step : steps) {
    std::vector<Region> regions;
    for (const auto& rn : need(step, "regions")) {
      Region r;
      r.action = read_index(need(rn, "action"), "action");
      r.candidate = read_index(need(rn, "candidate"), "candidate");
      r.optimal = need(rn, "optimal").as<bool>();
      for (const auto& s : need(rn, "successors")) r.successors.push_back(read_index(s, "successors"));
      r.gain = read_matrix(need(rn, "gain"), "gain");
      r.value = read_matrix(need(rn, "value"), "value");
      for (const auto& cn : need(rn, "constraints"))
        r.constraints.push_back({read_matrix(need(cn, "Y"), "Y"), parse_relation(need(cn, "relation").Scalar())});
      regions.push_back(std::move(r));
    }
    pol.steps.push_back(std::move(regions));
  }
  if (pol.horizon() != static_cast<int>(read_index(need(root, "horizon"), "horizon")))
    throw ConfigError("policy horizon does not match its step list");
  return pol;
}

void write_gains(std::ostream& os, const GainFile& file) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "kind" << YAML::Value << "gain_schedule";
  out << YAML::Key << "schedule" << YAML::Value << file.schedule;
  out << YAML::Key << "horizon" << YAML::Value << file.gains.horizon();
  out << YAML::Key << "actions" << YAML::Value << YAML::Flow << YAML::BeginSeq;
  for (auto a : file.gains.actions) out << a;
  out << YAML::EndSeq;
  out << YAML::Key << "gains" << YAML::Value << YAML::BeginSeq;
  for (const auto& K : file.gains.K) emit_matrix(out, K);
  out << YAML::EndSeq;
  out << YAML::Key << "values" << YAML::Value << YAML::BeginSeq;
  for (const auto& P : file.gains.P) emit_matrix(out, P);
  out << YAML::EndSeq << YAML::EndMap;
  os << out.c_str() << '\n';
}

GainFile read_gains(std::istream& is) {
  const YAML::Node root = load(is);
  if (!root.IsMap() || root["kind"].as<std::string>("") != "gain_schedule")
    throw ConfigError("document is not a gain schedule");
  GainFile f;
  f.schedule = need(root, "schedule").as<std::string>();
  for (const auto& a : need(root, "actions")) f.gains.actions.push_back(read_index(a, "actions"));
  for (const auto& K : need(root, "gains")) f.gains.K.push_back(read_matrix(K, "gains"));
  for (const auto& P : need(root, "values")) f.gains.P.push_back(read_matrix(P, "values"));
  const auto N = read_index(need(root, "horizon"), "horizon");
  if (f.gains.K.size() != N || f.gains.actions.size() != N || f.gains.P.size() != N + 1)
    throw ConfigError("gain schedule lists do not match its horizon");
  return f;
}

std::string document_kind(std::istream& is) {
  const YAML::Node root = load(is);
  const std::string kind = root.IsMap() ? root["kind"].as<std::string>("") : "";
  if (kind != "partition_policy" && kind != "gain_schedule")
    throw ConfigError("unrecognized document kind '" + kind + "'");
  return kind;
}

}  // namespace netlqr
