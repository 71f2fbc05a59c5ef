#pragma once

#include <iosfwd>
#include <string>

#include "netlqr/dynamic_solver.hpp"
#include "netlqr/static_solver.hpp"

namespace netlqr {

/// Shortest form is not used: always 17 significant digits, so every double
/// survives a write/read cycle bit for bit.
std::string format_double(double v);

/// Parses a decimal produced by format_double (or any strtod-compatible form).
double parse_double(const std::string& text);

void write_policy(std::ostream& os, const PartitionPolicy& pol);
PartitionPolicy read_policy(std::istream& is);

struct GainFile {
  std::string schedule;
  GainScheduled gains;
};

void write_gains(std::ostream& os, const GainFile& file);
GainFile read_gains(std::istream& is);

/// "partition_policy" or "gain_schedule"; throws ConfigError otherwise.
std::string document_kind(std::istream& is);

}  // namespace netlqr
