#pragma once

#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "prelog/fading_model.hpp"
#include "prelog/types.hpp"

namespace prelog {

// Invalid scenario or configuration. field() is the dotted JSON path.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& detail)
      : std::runtime_error(field + ": " + detail), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

// [[re, im], ...]
nlohmann::json complex_array(const CVector& v);
CVector complex_vector_from_json(const nlohmann::json& j, const std::string& field);

// Parses {t_s, n, nu_max, psd: {kind, total_power, coeffs, table}}. Missing
// or malformed fields raise ConfigError naming "<prefix>.<field>"; structural
// violations (Q >= N, ...) are reported the same way with the condition.
BlockSpec block_spec_from_json(const nlohmann::json& j, const std::string& prefix = "spec");

// Minimal RFC 4180 writer; every table starts with its header row.
class CsvWriter {
 public:
  CsvWriter(std::ostream& out, std::vector<std::string> header);
  CsvWriter& cell(std::string_view v);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  void end_row();

 private:
  std::ostream& out_;
  std::size_t columns_;
  std::size_t in_row_ = 0;
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const;
};

CsvTable read_csv(std::istream& in);

// Doubles printed with 17 significant digits so artifacts round-trip.
std::string format_double(double v);

// SHA-1 of "blob <size>\0<content>", hex encoded (same digest git assigns).
std::string git_blob_digest(std::string_view content);

// 64-bit FNV-1a, hex encoded.
std::string fnv1a_digest(const void* data, std::size_t bytes, std::uint64_t seed = 0xcbf29ce484222325ull);

}  // namespace prelog
