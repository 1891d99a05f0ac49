#ifndef HAFT_MODEL_HPP
#define HAFT_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "haft/errors.hpp"
#include "haft/numkernel.hpp"

namespace haft {

enum class Status { censored = 0, event = 1 };

/// One covariate column: numeric values or categorical labels.
struct DataColumn {
  enum class Kind { numeric, categorical };
  Kind kind = Kind::numeric;
  Eigen::VectorXd num;
  std::vector<std::string> cat;

  static DataColumn numeric(Eigen::VectorXd v) {
    DataColumn c;
    c.kind = Kind::numeric;
    c.num = std::move(v);
    return c;
  }
  static DataColumn categorical(std::vector<std::string> v) {
    DataColumn c;
    c.kind = Kind::categorical;
    c.cat = std::move(v);
    return c;
  }
  Eigen::Index rows() const {
    return kind == Kind::numeric ? num.size() : static_cast<Eigen::Index>(cat.size());
  }
};

/// Right-censored survival sample: positive times, event indicators, and a
/// named covariate table.  Treated as immutable once built.
struct SurvivalDataset {
  Eigen::VectorXd time;                                   // raw time units, > 0
  std::vector<Status> status;                             // per row
  std::vector<std::pair<std::string, DataColumn>> covariates;  // insertion order

  Eigen::Index n() const { return time.size(); }

  const DataColumn* find(const std::string& name) const {
    for (const auto& [key, col] : covariates)
      if (key == name) return &col;
    return nullptr;
  }

  void validate() const {
    const Eigen::Index rows = n();
    if (rows < 1) throw InputError("dataset: need at least one row");
    for (Eigen::Index i = 0; i < rows; ++i)
      if (!(time(i) > 0.0) || !std::isfinite(time(i)))
        throw InputError("dataset: times must be strictly positive and finite (row " +
                         std::to_string(i) + ")");
    if (static_cast<Eigen::Index>(status.size()) != rows)
      throw InputError("dataset: status length does not match time length");
    std::set<std::string> seen;
    for (const auto& [key, col] : covariates) {
      if (!seen.insert(key).second) throw InputError("dataset: duplicate column name '" + key + "'");
      if (col.rows() != rows)
        throw InputError("dataset: column '" + key + "' length does not match time length");
    }
  }

  /// Natural-log times; the single transformation site for fitting code.
  Eigen::VectorXd logtimes() const { return time.array().log().matrix(); }
};

inline std::vector<Status> flip_status(const std::vector<Status>& status) {
  std::vector<Status> flipped(status.size());
  for (std::size_t i = 0; i < status.size(); ++i)
    flipped[i] = (status[i] == Status::event) ? Status::censored : Status::event;
  return flipped;
}

// ---------------------------------------------------------------------------
// Term language: name, name:name, name^2 (plus "1" for the intercept)
// ---------------------------------------------------------------------------

struct Term {
  enum class Kind { main, interaction, square };
  Kind kind = Kind::main;
  std::string a;
  std::string b;  // second factor, interaction only

  std::string label() const {
    switch (kind) {
      case Kind::main: return a;
      case Kind::interaction: return a + ":" + b;
      case Kind::square: return a + "^2";
    }
    return a;
  }
  friend bool operator==(const Term& x, const Term& y) {
    return x.kind == y.kind && x.a == y.a && x.b == y.b;
  }
};

struct TermList {
  std::vector<Term> terms;
  bool intercept = true;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto from = s.find_first_not_of(" \t\r\n");
  if (from == std::string::npos) return "";
  const auto to = s.find_last_not_of(" \t\r\n");
  return s.substr(from, to - from + 1);
}

inline Term parse_one_term(const std::string& token) {
  const auto colon = token.find(':');
  const auto caret = token.find('^');
  if (colon != std::string::npos && caret != std::string::npos)
    throw InputError("term '" + token + "': cannot mix ':' and '^'");
  if (colon != std::string::npos) {
    if (token.find(':', colon + 1) != std::string::npos)
      throw InputError("term '" + token + "': only pairwise interactions are supported");
    Term t;
    t.kind = Term::Kind::interaction;
    t.a = trim(token.substr(0, colon));
    t.b = trim(token.substr(colon + 1));
    if (t.a.empty() || t.b.empty())
      throw InputError("term '" + token + "': empty interaction factor");
    return t;
  }
  if (caret != std::string::npos) {
    if (trim(token.substr(caret + 1)) != "2")
      throw InputError("term '" + token + "': only squares (name^2) are supported");
    Term t;
    t.kind = Term::Kind::square;
    t.a = trim(token.substr(0, caret));
    if (t.a.empty()) throw InputError("term '" + token + "': empty square base");
    return t;
  }
  Term t;
  t.kind = Term::Kind::main;
  t.a = token;
  return t;
}

}  // namespace detail

/// Parse a comma-separated term list.  "1" asserts the (default-on) intercept;
/// an empty string yields an intercept-only part.
inline TermList parse_terms(const std::string& text) {
  TermList out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const std::string raw =
        (comma == std::string::npos) ? text.substr(start) : text.substr(start, comma - start);
    const std::string token = detail::trim(raw);
    if (!token.empty() && token != "1") out.terms.push_back(detail::parse_one_term(token));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

/// Location- and scale-part term lists for one model.
struct CovariateSpec {
  TermList location;
  TermList scale;
};

// ---------------------------------------------------------------------------
// Design construction
// ---------------------------------------------------------------------------

/// Categorical coding record: sorted level list per column, first level is the
/// reference (dummy/treatment coding).
struct EncodingMap {
  std::map<std::string, std::vector<std::string>> levels;
};

struct DesignPair {
  Eigen::MatrixXd W;
  Eigen::MatrixXd Z;
  std::vector<std::string> w_names;
  std::vector<std::string> z_names;
  EncodingMap encoding;

  Eigen::Index n() const { return W.rows(); }
  Eigen::Index p() const { return W.cols(); }
  Eigen::Index q() const { return Z.cols(); }
};

namespace detail {

// Columns a term expands to, before assembly into the design matrix.
struct ExpandedColumns {
  std::vector<std::string> names;
  std::vector<Eigen::VectorXd> values;
};

inline const std::vector<std::string>& levels_for(const EncodingMap& enc, const std::string& col) {
  const auto it = enc.levels.find(col);
  if (it == enc.levels.end())
    throw InputError("encoding map has no levels for categorical column '" + col + "'");
  return it->second;
}

// Dummy columns for a categorical column under a fixed level set: one 0/1
// column per non-reference level, reference = levels[0].
inline ExpandedColumns encode_categorical(const std::string& name, const DataColumn& col,
                                          const EncodingMap& enc) {
  const auto& levels = levels_for(enc, name);
  const Eigen::Index n = col.rows();
  ExpandedColumns out;
  std::map<std::string, int> index;
  for (std::size_t k = 0; k < levels.size(); ++k) index[levels[k]] = static_cast<int>(k);
  for (std::size_t k = 1; k < levels.size(); ++k) {
    out.names.push_back(name + "[" + levels[k] + "]");
    out.values.emplace_back(Eigen::VectorXd::Zero(n));
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto it = index.find(col.cat[i]);
    if (it == index.end())
      throw InputError("column '" + name + "': level '" + col.cat[i] +
                       "' not present in the encoding map");
    if (it->second > 0) out.values[it->second - 1](i) = 1.0;
  }
  return out;
}

inline ExpandedColumns expand_factor(const std::string& name, const SurvivalDataset& data,
                                     const EncodingMap& enc) {
  const DataColumn* col = data.find(name);
  if (!col) throw InputError("unknown covariate column '" + name + "'");
  if (col->kind == DataColumn::Kind::numeric) {
    for (Eigen::Index i = 0; i < col->num.size(); ++i)
      if (!std::isfinite(col->num(i)))
        throw InputError("column '" + name + "': non-finite value in row " + std::to_string(i));
    return {{name}, {col->num}};
  }
  return encode_categorical(name, *col, enc);
}

inline ExpandedColumns expand_term(const Term& term, const SurvivalDataset& data,
                                   const EncodingMap& enc) {
  switch (term.kind) {
    case Term::Kind::main:
      return expand_factor(term.a, data, enc);
    case Term::Kind::square: {
      const DataColumn* col = data.find(term.a);
      if (!col) throw InputError("unknown covariate column '" + term.a + "'");
      if (col->kind != DataColumn::Kind::numeric)
        throw InputError("term '" + term.label() + "': squares require a numeric column");
      ExpandedColumns base = expand_factor(term.a, data, enc);
      return {{term.a + "^2"}, {base.values[0].cwiseProduct(base.values[0])}};
    }
    case Term::Kind::interaction: {
      ExpandedColumns left = expand_factor(term.a, data, enc);
      ExpandedColumns right = expand_factor(term.b, data, enc);
      ExpandedColumns out;
      for (std::size_t i = 0; i < left.values.size(); ++i)
        for (std::size_t j = 0; j < right.values.size(); ++j) {
          out.names.push_back(left.names[i] + ":" + right.names[j]);
          out.values.push_back(left.values[i].cwiseProduct(right.values[j]));
        }
      return out;
    }
  }
  throw InputError("unreachable term kind");
}

inline void check_part(const TermList& part, const SurvivalDataset& data, const char* which) {
  std::vector<std::string> seen;
  for (const Term& t : part.terms) {
    const std::string label = t.label();
    if (std::find(seen.begin(), seen.end(), label) != seen.end())
      throw InputError(std::string(which) + " terms: duplicate term '" + label + "'");
    seen.push_back(label);
    if (!data.find(t.a)) throw InputError("unknown covariate column '" + t.a + "'");
    if (t.kind == Term::Kind::interaction && !data.find(t.b))
      throw InputError("unknown covariate column '" + t.b + "'");
  }
}

inline void build_part(const TermList& part, const SurvivalDataset& data, const EncodingMap& enc,
                       Eigen::MatrixXd& design, std::vector<std::string>& names,
                       const char* which) {
  std::vector<Eigen::VectorXd> columns;
  names.clear();
  if (part.intercept) {
    names.emplace_back("(Intercept)");
    columns.emplace_back(Eigen::VectorXd::Ones(data.n()));
  }
  // Deterministic order: intercept, then main effects, then interactions and
  // squares, each group in the order the terms were written.
  for (const Term& t : part.terms)
    if (t.kind == Term::Kind::main) {
      ExpandedColumns cols = expand_term(t, data, enc);
      for (std::size_t k = 0; k < cols.names.size(); ++k) {
        names.push_back(cols.names[k]);
        columns.push_back(std::move(cols.values[k]));
      }
    }
  for (const Term& t : part.terms)
    if (t.kind != Term::Kind::main) {
      ExpandedColumns cols = expand_term(t, data, enc);
      for (std::size_t k = 0; k < cols.names.size(); ++k) {
        names.push_back(cols.names[k]);
        columns.push_back(std::move(cols.values[k]));
      }
    }
  if (columns.empty())
    throw InputError(std::string(which) + " part: no design columns (empty terms, intercept off)");
  design.resize(data.n(), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) design.col(static_cast<Eigen::Index>(k)) = columns[k];
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  check_rank(qr, static_cast<int>(design.cols()), &names, which);
}

}  // namespace detail

/// Levels observed in the data, sorted, for every categorical column a spec
/// references.  Single-level columns are rejected (they encode to nothing).
inline EncodingMap encoding_from_data(const SurvivalDataset& data, const CovariateSpec& spec) {
  EncodingMap enc;
  auto note = [&](const std::string& name) {
    const DataColumn* col = data.find(name);
    if (!col || col->kind != DataColumn::Kind::categorical) return;
    if (enc.levels.count(name)) return;
    std::set<std::string> uniq(col->cat.begin(), col->cat.end());
    if (uniq.size() < 2)
      throw SingularError("categorical column '" + name + "' has a single level", {name});
    enc.levels[name] = std::vector<std::string>(uniq.begin(), uniq.end());
  };
  for (const TermList* part : {&spec.location, &spec.scale})
    for (const Term& t : part->terms) {
      note(t.a);
      if (t.kind == Term::Kind::interaction) note(t.b);
    }
  return enc;
}

/// Location/scale design matrices under a caller-supplied coding — used to
/// encode new rows exactly as a fitted model's training data was encoded.
inline DesignPair build_designs(const SurvivalDataset& data, const CovariateSpec& spec,
                                const EncodingMap& encoding) {
  data.validate();
  detail::check_part(spec.location, data, "location");
  detail::check_part(spec.scale, data, "scale");
  DesignPair out;
  out.encoding = encoding;
  detail::build_part(spec.location, data, encoding, out.W, out.w_names, "location");
  detail::build_part(spec.scale, data, encoding, out.Z, out.z_names, "scale");
  return out;
}

/// Location/scale design matrices with the coding derived from the data
/// (sorted levels, first = reference).
inline DesignPair build_designs(const SurvivalDataset& data, const CovariateSpec& spec) {
  return build_designs(data, spec, encoding_from_data(data, spec));
}

// ---------------------------------------------------------------------------
// Parameters and fitted models
// ---------------------------------------------------------------------------

struct HaftParams {
  Eigen::VectorXd beta;   // location coefficients, log-time units
  Eigen::VectorXd gamma;  // log-variance coefficients
};

struct LinearPredictors {
  Eigen::VectorXd mu;     // conditional mean of log time
  Eigen::VectorXd sigma;  // conditional sd of log time, exp(z'gamma/2)
};

inline LinearPredictors linear_predictors(const DesignPair& designs, const HaftParams& params) {
  if (params.beta.size() != designs.p() || params.gamma.size() != designs.q())
    throw DomainError("linear_predictors: parameter/design dimension mismatch");
  LinearPredictors out;
  out.mu = designs.W * params.beta;
  out.sigma = (0.5 * (designs.Z * params.gamma).array()).exp().matrix();
  return out;
}

struct FittedModel {
  HaftParams params;
  std::vector<std::string> w_names;
  std::vector<std::string> z_names;
  double loglik = std::numeric_limits<double>::quiet_NaN();
  double aic = std::numeric_limits<double>::quiet_NaN();
  std::optional<Eigen::MatrixXd> vcov;  // (p+q) x (p+q), beta block first
  bool vcov_clipped = false;            // information was not positive definite
  bool converged = false;
  int iterations = 0;
  bool censored_fit = false;
  Eigen::Index n = 0;
  std::vector<double> objective_trace;  // objective after init and each sweep
};

}  // namespace haft

#endif  // HAFT_MODEL_HPP
