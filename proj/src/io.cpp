#include "prelog/io.hpp"

#include <cstdio>
#include <iomanip>
#include <istream>
#include <sstream>

#include <openssl/evp.h>

namespace prelog {

nlohmann::json complex_array(const CVector& v) {
  nlohmann::json arr = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    arr.push_back({v(i).real(), v(i).imag()});
  }
  return arr;
}

CVector complex_vector_from_json(const nlohmann::json& j, const std::string& field) {
  if (!j.is_array()) {
    throw ConfigError(field, "expected an array of [re, im] pairs");
  }
  CVector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (e.is_number()) {
      v(static_cast<Eigen::Index>(i)) = e.get<double>();
    } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
      v(static_cast<Eigen::Index>(i)) = cplx(e[0].get<double>(), e[1].get<double>());
    } else {
      throw ConfigError(field + "[" + std::to_string(i) + "]", "expected a number or [re, im]");
    }
  }
  return v;
}

namespace {

double require_number(const nlohmann::json& j, const std::string& key, const std::string& path) {
  if (!j.contains(key)) {
    throw ConfigError(path + "." + key, "missing required field");
  }
  if (!j.at(key).is_number()) {
    throw ConfigError(path + "." + key, "expected a number");
  }
  return j.at(key).get<double>();
}

}  // namespace

BlockSpec block_spec_from_json(const nlohmann::json& j, const std::string& prefix) {
  if (!j.is_object()) {
    throw ConfigError(prefix, "expected an object");
  }
  const double t_s = require_number(j, "t_s", prefix);
  const double n_raw = require_number(j, "n", prefix);
  const double nu_max = require_number(j, "nu_max", prefix);
  if (n_raw != std::floor(n_raw)) {
    throw ConfigError(prefix + ".n", "expected an integer");
  }
  PsdSpec psd = PsdSpec::flat();
  if (j.contains("psd")) {
    const auto& pj = j.at("psd");
    const std::string path = prefix + ".psd";
    if (!pj.is_object()) {
      throw ConfigError(path, "expected an object");
    }
    const std::string kind = pj.value("kind", std::string("flat"));
    const double total = pj.contains("total_power") ? require_number(pj, "total_power", path) : 1.0;
    if (kind == "flat") {
      psd = PsdSpec::flat(total);
    } else if (kind == "periodic") {
      if (!pj.contains("coeffs") || !pj.at("coeffs").is_array()) {
        throw ConfigError(path + ".coeffs", "periodic PSD needs an array of line weights");
      }
      std::vector<double> coeffs;
      for (const auto& c : pj.at("coeffs")) {
        if (!c.is_number()) {
          throw ConfigError(path + ".coeffs", "line weights must be numbers");
        }
        coeffs.push_back(c.get<double>());
      }
      psd = PsdSpec::periodic(std::move(coeffs));
      if (pj.contains("total_power") && std::abs(total - psd.total_power) > 1e-10) {
        throw ConfigError(path + ".total_power", "does not equal the sum of the line weights");
      }
    } else if (kind == "table") {
      if (!pj.contains("table") || !pj.at("table").is_array()) {
        throw ConfigError(path + ".table", "table PSD needs [[nu, S], ...]");
      }
      std::vector<std::array<double, 2>> table;
      for (const auto& row : pj.at("table")) {
        if (!row.is_array() || row.size() != 2 || !row[0].is_number() || !row[1].is_number()) {
          throw ConfigError(path + ".table", "each entry must be [nu, S]");
        }
        table.push_back({row[0].get<double>(), row[1].get<double>()});
      }
      psd = PsdSpec::user_table(std::move(table), total);
    } else {
      throw ConfigError(path + ".kind", "unknown PSD kind '" + kind + "'");
    }
  }
  try {
    return make_block_spec(t_s, static_cast<int>(n_raw), nu_max, std::move(psd));
  } catch (const SpecError& e) {
    throw ConfigError(prefix, e.what());
  }
}

CsvWriter::CsvWriter(std::ostream& out, std::vector<std::string> header)
    : out_(out), columns_(header.size()) {
  for (const auto& h : header) {
    cell(h);
  }
  end_row();
}

CsvWriter& CsvWriter::cell(std::string_view v) {
  if (in_row_ > 0) {
    out_ << ',';
  }
  if (v.find_first_of(",\"\n") != std::string_view::npos) {
    out_ << '"';
    for (char c : v) {
      if (c == '"') {
        out_ << '"';
      }
      out_ << c;
    }
    out_ << '"';
  } else {
    out_ << v;
  }
  ++in_row_;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) { return cell(format_double(v)); }

CsvWriter& CsvWriter::cell(long long v) { return cell(std::to_string(v)); }

void CsvWriter::end_row() {
  if (in_row_ != columns_) {
    throw std::logic_error("CsvWriter: row has " + std::to_string(in_row_) + " cells, header has " +
                           std::to_string(columns_));
  }
  out_ << '\n';
  in_row_ = 0;
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) {
      return i;
    }
  }
  throw ConfigError(name, "column missing from CSV input");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  cells.push_back(cur);
  return cells;
}

}  // namespace

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) {
    throw ConfigError("csv", "empty input, expected a header row");
  }
  t.header = split_csv_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) {
      continue;
    }
    auto cells = split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw ConfigError("csv", "row " + std::to_string(t.rows.size() + 2) + " has " +
                                   std::to_string(cells.size()) + " cells, header has " +
                                   std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string git_blob_digest(std::string_view content) {
  const std::string header = "blob " + std::to_string(content.size()) + std::string(1, '\0');
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha1(), nullptr);
  EVP_DigestUpdate(ctx, header.data(), header.size());
  EVP_DigestUpdate(ctx, content.data(), content.size());
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return hex.str();
}

std::string fnv1a_digest(const void* data, std::size_t bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  std::ostringstream hex;
  hex << std::hex << std::setw(16) << std::setfill('0') << h;
  return hex.str();
}

}  // namespace prelog
