#ifndef HAFT_IO_HPP
#define HAFT_IO_HPP

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "haft/errors.hpp"
#include "haft/model.hpp"
#include "haft/simulate.hpp"

namespace haft {

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Rectangular CSV content: header plus string cells.  The dialect is
/// deliberately small: comma-separated, no quoting, '.' decimal point,
/// UTF-8, header row required.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  Eigen::Index n_rows() const { return static_cast<Eigen::Index>(rows.size()); }

  int column(const std::string& name) const {
    for (std::size_t j = 0; j < header.size(); ++j)
      if (header[j] == name) return static_cast<int>(j);
    return -1;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return out;
}

}  // namespace detail

inline CsvTable read_csv(std::istream& in) {
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> cells = detail::split_csv_line(line);
    if (table.header.empty()) {
      for (const std::string& h : cells)
        if (h.empty()) throw InputError("csv: empty header name in line 1");
      std::set<std::string> uniq(cells.begin(), cells.end());
      if (uniq.size() != cells.size()) throw InputError("csv: duplicate header names");
      table.header = std::move(cells);
      continue;
    }
    if (cells.size() != table.header.size())
      throw InputError("csv: line " + std::to_string(lineno) + " has " +
                       std::to_string(cells.size()) + " fields, header has " +
                       std::to_string(table.header.size()));
    table.rows.push_back(std::move(cells));
  }
  if (table.header.empty()) throw InputError("csv: missing header row");
  return table;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  return read_csv(in);
}

inline void write_csv(std::ostream& out, const CsvTable& table) {
  for (std::size_t j = 0; j < table.header.size(); ++j)
    out << (j ? "," : "") << table.header[j];
  out << "\n";
  for (const auto& row : table.rows) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << "\n";
  }
}

inline void write_csv_file(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  write_csv(out, table);
}

/// 17 significant digits: enough for exact double round-trips.
inline std::string format_g17(double x) {
  char buffer[40];
  std::snprintf(buffer, sizeof buffer, "%.17g", x);
  return buffer;
}

namespace detail {

inline bool parse_double(const std::string& text, double& out) {
  if (text.empty()) return false;
  const char* begin = text.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end == begin + text.size();
}

}  // namespace detail

/// Interpret a CSV table as a survival dataset.  The time column must be
/// positive numbers, the status column 1 (event) or 0 (censored); every other
/// column becomes a covariate — numeric when every cell parses as a number,
/// categorical otherwise.  Empty cells are an error (no missing-data support).
inline SurvivalDataset dataset_from_csv(const CsvTable& table, const std::string& time_col,
                                        const std::string& status_col) {
  const int t = table.column(time_col);
  const int s = table.column(status_col);
  if (t < 0) throw InputError("csv: no column named '" + time_col + "' (time)");
  if (s < 0) throw InputError("csv: no column named '" + status_col + "' (status)");
  const Eigen::Index n = table.n_rows();
  if (n < 1) throw InputError("csv: no data rows");
  SurvivalDataset data;
  data.time.resize(n);
  data.status.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = table.rows[static_cast<std::size_t>(i)];
    double value;
    if (!detail::parse_double(row[static_cast<std::size_t>(t)], value))
      throw InputError("csv: row " + std::to_string(i + 1) + ": time '" +
                       row[static_cast<std::size_t>(t)] + "' is not a number");
    data.time(i) = value;
    if (!detail::parse_double(row[static_cast<std::size_t>(s)], value) ||
        (value != 0.0 && value != 1.0))
      throw InputError("csv: row " + std::to_string(i + 1) + ": status '" +
                       row[static_cast<std::size_t>(s)] + "' must be 0 or 1");
    data.status[i] = (value == 1.0) ? Status::event : Status::censored;
  }
  for (std::size_t j = 0; j < table.header.size(); ++j) {
    if (static_cast<int>(j) == t || static_cast<int>(j) == s) continue;
    bool numeric = true;
    for (const auto& row : table.rows) {
      if (row[j].empty())
        throw InputError("csv: column '" + table.header[j] + "' has an empty cell");
      double value;
      if (!detail::parse_double(row[j], value)) {
        numeric = false;
        break;
      }
    }
    if (numeric) {
      Eigen::VectorXd v(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        double value;
        detail::parse_double(table.rows[static_cast<std::size_t>(i)][j], value);
        v(i) = value;
      }
      data.covariates.emplace_back(table.header[j], DataColumn::numeric(std::move(v)));
    } else {
      std::vector<std::string> v;
      v.reserve(static_cast<std::size_t>(n));
      for (const auto& row : table.rows) {
        if (row[j].empty())
          throw InputError("csv: column '" + table.header[j] + "' has an empty cell");
        v.push_back(row[j]);
      }
      data.covariates.emplace_back(table.header[j], DataColumn::categorical(std::move(v)));
    }
  }
  data.validate();
  return data;
}

/// Dataset as CSV: time, status, then covariates, numbers at 17 significant
/// digits for lossless round-trips.
inline CsvTable dataset_to_csv(const SurvivalDataset& data, const std::string& time_col = "time",
                               const std::string& status_col = "status") {
  CsvTable table;
  table.header.push_back(time_col);
  table.header.push_back(status_col);
  for (const auto& [name, col] : data.covariates) table.header.push_back(name);
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    std::vector<std::string> row;
    row.push_back(format_g17(data.time(i)));
    row.push_back(data.status[static_cast<std::size_t>(i)] == Status::event ? "1" : "0");
    for (const auto& [name, col] : data.covariates)
      row.push_back(col.kind == DataColumn::Kind::numeric
                        ? format_g17(col.num(i))
                        : col.cat[static_cast<std::size_t>(i)]);
    table.rows.push_back(std::move(row));
  }
  return table;
}

// ---------------------------------------------------------------------------
// Dataset fingerprint
// ---------------------------------------------------------------------------

inline std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (const unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

struct DatasetFingerprint {
  Eigen::Index rows = 0;
  std::string column_hash;  // 16 hex digits over the covariate column names
};

inline DatasetFingerprint fingerprint(const SurvivalDataset& data) {
  std::string joined;
  for (const auto& [name, col] : data.covariates) {
    joined += name;
    joined += '\n';
  }
  char buffer[17];
  std::snprintf(buffer, sizeof buffer, "%016llx",
                static_cast<unsigned long long>(fnv1a64(joined)));
  return {data.n(), buffer};
}

// ---------------------------------------------------------------------------
// Model persistence (versioned JSON)
// ---------------------------------------------------------------------------

/// Everything needed to reuse a fit on new data: the fitted model, the term
/// specification, and the categorical coding it was built with.
struct ModelFile {
  int schema_version = 1;
  CovariateSpec spec;
  EncodingMap encoding;
  FittedModel model;
  DatasetFingerprint data_fingerprint;
};

namespace detail {

inline nlohmann::ordered_json terms_to_json(const TermList& part) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (const Term& t : part.terms) out.push_back(t.label());
  return out;
}

inline TermList terms_from_json(const nlohmann::json& array, bool intercept) {
  TermList part;
  part.intercept = intercept;
  for (const auto& item : array) part.terms.push_back(parse_one_term(item.get<std::string>()));
  return part;
}

inline nlohmann::ordered_json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::ordered_json out = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline Eigen::VectorXd vector_from_json(const nlohmann::json& array) {
  Eigen::VectorXd v(array.size());
  Eigen::Index i = 0;
  for (const auto& item : array) v(i++) = item.get<double>();
  return v;
}

}  // namespace detail

/// Deterministic JSON text: fixed key order, shortest-round-trip numbers, so
/// save -> load -> save is byte-identical.
inline std::string to_json(const ModelFile& file) {
  nlohmann::ordered_json j;
  j["schema_version"] = file.schema_version;
  j["fit_kind"] = file.model.censored_fit ? "censored" : "uncensored";
  j["location_terms"] = detail::terms_to_json(file.spec.location);
  j["location_intercept"] = file.spec.location.intercept;
  j["scale_terms"] = detail::terms_to_json(file.spec.scale);
  j["scale_intercept"] = file.spec.scale.intercept;
  nlohmann::ordered_json enc = nlohmann::ordered_json::object();
  for (const auto& [name, levels] : file.encoding.levels) enc[name] = levels;
  j["encoding"] = std::move(enc);
  j["beta_names"] = file.model.w_names;
  j["beta"] = detail::vector_to_json(file.model.params.beta);
  j["gamma_names"] = file.model.z_names;
  j["gamma"] = detail::vector_to_json(file.model.params.gamma);
  j["loglik"] = file.model.loglik;
  j["aic"] = file.model.aic;
  j["converged"] = file.model.converged;
  j["iterations"] = file.model.iterations;
  if (file.model.vcov) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index r = 0; r < file.model.vcov->rows(); ++r)
      rows.push_back(detail::vector_to_json(file.model.vcov->row(r)));
    j["vcov"] = std::move(rows);
  } else {
    j["vcov"] = nullptr;
  }
  j["vcov_clipped"] = file.model.vcov_clipped;
  j["fingerprint"] = {{"rows", file.data_fingerprint.rows},
                      {"columns", file.data_fingerprint.column_hash}};
  return j.dump(2) + "\n";
}

inline ModelFile model_file_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file: invalid JSON: ") + e.what());
  }
  try {
    ModelFile file;
    file.schema_version = j.at("schema_version").get<int>();
    if (file.schema_version != 1)
      throw InputError("model file: unsupported schema_version " +
                       std::to_string(file.schema_version));
    file.model.censored_fit = (j.at("fit_kind").get<std::string>() == "censored");
    file.spec.location =
        detail::terms_from_json(j.at("location_terms"), j.at("location_intercept").get<bool>());
    file.spec.scale =
        detail::terms_from_json(j.at("scale_terms"), j.at("scale_intercept").get<bool>());
    for (const auto& [name, levels] : j.at("encoding").items())
      file.encoding.levels[name] = levels.get<std::vector<std::string>>();
    file.model.w_names = j.at("beta_names").get<std::vector<std::string>>();
    file.model.params.beta = detail::vector_from_json(j.at("beta"));
    file.model.z_names = j.at("gamma_names").get<std::vector<std::string>>();
    file.model.params.gamma = detail::vector_from_json(j.at("gamma"));
    file.model.loglik = j.at("loglik").get<double>();
    file.model.aic = j.at("aic").get<double>();
    file.model.converged = j.at("converged").get<bool>();
    file.model.iterations = j.at("iterations").get<int>();
    if (!j.at("vcov").is_null()) {
      const auto& rows = j.at("vcov");
      const auto dim = static_cast<Eigen::Index>(rows.size());
      Eigen::MatrixXd vcov(dim, dim);
      Eigen::Index r = 0;
      for (const auto& row : rows) {
        if (static_cast<Eigen::Index>(row.size()) != dim)
          throw InputError("model file: vcov is not square");
        vcov.row(r++) = detail::vector_from_json(row);
      }
      file.model.vcov = std::move(vcov);
    }
    file.model.vcov_clipped = j.at("vcov_clipped").get<bool>();
    file.data_fingerprint.rows = j.at("fingerprint").at("rows").get<Eigen::Index>();
    file.data_fingerprint.column_hash = j.at("fingerprint").at("columns").get<std::string>();
    file.model.n = file.data_fingerprint.rows;
    if (file.model.params.beta.size() != static_cast<Eigen::Index>(file.model.w_names.size()) ||
        file.model.params.gamma.size() != static_cast<Eigen::Index>(file.model.z_names.size()))
      throw InputError("model file: coefficient/name length mismatch");
    return file;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("model file: missing or mistyped field: ") + e.what());
  }
}

inline void save_model_file(const std::string& path, const ModelFile& file) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot open '" + path + "' for writing");
  out << to_json(file);
}

inline ModelFile load_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return model_file_from_json(buffer.str());
}

// ---------------------------------------------------------------------------
// Simulation configuration (JSON)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
T require_field(const nlohmann::json& j, const std::string& path, const char* key) {
  if (!j.contains(key)) throw InputError("simulation config: missing field " + path + key);
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError("simulation config: field " + path + key + " has the wrong type");
  }
}

inline Eigen::VectorXd vector_from_json_checked(const nlohmann::json& j, const std::string& path,
                                                const char* key) {
  if (!j.contains(key) || !j.at(key).is_array())
    throw InputError("simulation config: missing array field " + path + key);
  Eigen::VectorXd v(j.at(key).size());
  Eigen::Index i = 0;
  for (const auto& item : j.at(key)) {
    if (!item.is_number())
      throw InputError("simulation config: field " + path + key + " must contain numbers");
    v(i++) = item.get<double>();
  }
  return v;
}

}  // namespace detail

/// Parse a simulation spec.  `seed` may live in the file or be supplied by
/// the caller (CLI flag); the flag wins.  Errors name the offending field.
inline SimSpec sim_spec_from_json(const std::string& text,
                                  std::optional<std::uint64_t> seed_override = std::nullopt) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("simulation config: invalid JSON: ") + e.what());
  }
  SimSpec spec;
  spec.n = detail::require_field<Eigen::Index>(j, "", "n");
  if (!j.contains("covariates") || !j.at("covariates").is_array())
    throw InputError("simulation config: missing array field covariates");
  std::size_t index = 0;
  for (const auto& cj : j.at("covariates")) {
    const std::string path = "covariates[" + std::to_string(index++) + "].";
    CovariateGen g;
    g.name = detail::require_field<std::string>(cj, path, "name");
    const std::string kind = detail::require_field<std::string>(cj, path, "kind");
    if (kind == "normal") {
      g.kind = CovariateGen::Kind::normal;
      g.mean = detail::require_field<double>(cj, path, "mean");
      g.sd = detail::require_field<double>(cj, path, "sd");
    } else if (kind == "uniform") {
      g.kind = CovariateGen::Kind::uniform;
      g.lo = detail::require_field<double>(cj, path, "lo");
      g.hi = detail::require_field<double>(cj, path, "hi");
    } else if (kind == "bernoulli") {
      g.kind = CovariateGen::Kind::bernoulli;
      g.p = detail::require_field<double>(cj, path, "p");
    } else if (kind == "categorical") {
      g.kind = CovariateGen::Kind::categorical;
      g.levels = detail::require_field<std::vector<std::string>>(cj, path, "levels");
      g.probs = detail::require_field<std::vector<double>>(cj, path, "probs");
    } else {
      throw InputError("simulation config: field " + path +
                       "kind must be normal|uniform|bernoulli|categorical");
    }
    spec.covariates.push_back(std::move(g));
  }
  spec.model_spec.location = parse_terms(detail::require_field<std::string>(j, "", "location_terms"));
  spec.model_spec.scale = parse_terms(detail::require_field<std::string>(j, "", "scale_terms"));
  spec.beta = detail::vector_from_json_checked(j, "", "beta");
  spec.gamma = detail::vector_from_json_checked(j, "", "gamma");
  if (!j.contains("censoring"))
    throw InputError("simulation config: missing field censoring");
  const auto& cj = j.at("censoring");
  const std::string ckind = detail::require_field<std::string>(cj, "censoring.", "kind");
  if (ckind == "none") {
    spec.censoring.kind = CensoringSpec::Kind::none;
  } else if (ckind == "fixed") {
    spec.censoring.kind = CensoringSpec::Kind::fixed;
    spec.censoring.fixed_time = detail::require_field<double>(cj, "censoring.", "time");
  } else if (ckind == "haft") {
    spec.censoring.kind = CensoringSpec::Kind::haft;
    spec.censoring.spec.location =
        parse_terms(detail::require_field<std::string>(cj, "censoring.", "location_terms"));
    spec.censoring.spec.scale =
        parse_terms(detail::require_field<std::string>(cj, "censoring.", "scale_terms"));
    spec.censoring.beta = detail::vector_from_json_checked(cj, "censoring.", "beta");
    spec.censoring.gamma = detail::vector_from_json_checked(cj, "censoring.", "gamma");
  } else {
    throw InputError("simulation config: field censoring.kind must be none|fixed|haft");
  }
  if (seed_override) {
    spec.seed = *seed_override;
  } else if (j.contains("seed")) {
    spec.seed = detail::require_field<std::uint64_t>(j, "", "seed");
  } else {
    throw InputError("simulation config: no seed (provide a seed field or the --seed flag)");
  }
  return spec;
}

}  // namespace haft

#endif  // HAFT_IO_HPP
