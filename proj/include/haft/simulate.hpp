#ifndef HAFT_SIMULATE_HPP
#define HAFT_SIMULATE_HPP

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "haft/errors.hpp"
#include "haft/model.hpp"
#include "haft/rng.hpp"

namespace haft {

/// One synthetic covariate column.
struct CovariateGen {
  enum class Kind { normal, uniform, bernoulli, categorical };
  std::string name;
  Kind kind = Kind::normal;
  double mean = 0.0, sd = 1.0;       // normal
  double lo = 0.0, hi = 1.0;         // uniform
  double p = 0.5;                    // bernoulli (numeric 0/1 column)
  std::vector<std::string> levels;   // categorical
  std::vector<double> probs;         // categorical, same length as levels
};

struct CensoringSpec {
  enum class Kind { none, fixed, haft };
  Kind kind = Kind::none;
  double fixed_time = 0.0;           // raw time units, kind == fixed
  CovariateSpec spec;                // kind == haft
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
};

struct SimSpec {
  Eigen::Index n = 0;
  std::vector<CovariateGen> covariates;
  CovariateSpec model_spec;          // terms for the survival law
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  CensoringSpec censoring;
  std::uint64_t seed = 0;            // always set explicitly; no ambient randomness
};

/// Per-row latent truth, kept apart from the public dataset so oracle values
/// can never leak into a fit.
struct SimTruth {
  Eigen::VectorXd log_r;  // latent log survival times
  Eigen::VectorXd log_c;  // latent log censoring times (+inf when uncensored)
  Eigen::VectorXd mu;     // survival-model conditional means
  Eigen::VectorXd sigma;  // survival-model conditional sds
};

struct SimResult {
  SurvivalDataset data;
  SimTruth truth;
};

namespace detail {

inline void validate_sim_spec(const SimSpec& spec) {
  if (spec.n < 1) throw InputError("simulate: n must be at least 1");
  std::set<std::string> names;
  for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
    const CovariateGen& g = spec.covariates[c];
    const std::string where = "covariates[" + std::to_string(c) + "]";
    if (g.name.empty()) throw InputError("simulate: " + where + ".name is empty");
    if (!names.insert(g.name).second)
      throw InputError("simulate: duplicate covariate name '" + g.name + "'");
    switch (g.kind) {
      case CovariateGen::Kind::normal:
        if (!(g.sd > 0.0) || !std::isfinite(g.mean))
          throw InputError("simulate: " + where + ": normal needs finite mean, sd > 0");
        break;
      case CovariateGen::Kind::uniform:
        if (!(g.lo < g.hi)) throw InputError("simulate: " + where + ": uniform needs lo < hi");
        break;
      case CovariateGen::Kind::bernoulli:
        if (!(g.p >= 0.0 && g.p <= 1.0))
          throw InputError("simulate: " + where + ".p must lie in [0, 1]");
        break;
      case CovariateGen::Kind::categorical: {
        if (g.levels.size() < 2)
          throw InputError("simulate: " + where + ".levels needs at least two levels");
        if (g.probs.size() != g.levels.size())
          throw InputError("simulate: " + where + ".probs length must match levels");
        double total = 0.0;
        for (double p : g.probs) {
          if (!(p >= 0.0)) throw InputError("simulate: " + where + ".probs must be nonnegative");
          total += p;
        }
        if (std::abs(total - 1.0) > 1e-8)
          throw InputError("simulate: " + where + ".probs must sum to 1");
        std::set<std::string> uniq(g.levels.begin(), g.levels.end());
        if (uniq.size() != g.levels.size())
          throw InputError("simulate: " + where + ".levels contains duplicates");
        break;
      }
    }
  }
  if (spec.censoring.kind == CensoringSpec::Kind::fixed && !(spec.censoring.fixed_time > 0.0))
    throw InputError("simulate: censoring.fixed_time must be strictly positive");
}

}  // namespace detail

/// Level sets declared by the generators (sorted, first = reference), so the
/// design layout — and hence the meaning of beta and gamma — is independent
/// of which levels a particular realization happens to draw.
inline EncodingMap encoding_from_generators(const std::vector<CovariateGen>& generators) {
  EncodingMap enc;
  for (const CovariateGen& g : generators)
    if (g.kind == CovariateGen::Kind::categorical) {
      std::vector<std::string> sorted = g.levels;
      std::sort(sorted.begin(), sorted.end());
      enc.levels[g.name] = sorted;
    }
  return enc;
}

/// Draw a dataset from the model: covariates first, then latent log survival
/// and censoring times, observing time = exp(min) and the event indicator.
///
/// Stream layout (documented for reproducibility): stream k draws covariate
/// column k, stream K the survival noise, stream K+1 the censoring noise,
/// where K = number of covariate columns.  Each stream is an independently
/// seeded mt19937_64; see `stream_seed`.
inline SimResult simulate(const SimSpec& spec) {
  detail::validate_sim_spec(spec);
  const Eigen::Index n = spec.n;

  SurvivalDataset data;
  data.time.resize(n);
  data.status.resize(n);
  for (std::size_t c = 0; c < spec.covariates.size(); ++c) {
    const CovariateGen& g = spec.covariates[c];
    Rng rng(stream_seed(spec.seed, c));
    switch (g.kind) {
      case CovariateGen::Kind::normal: {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = g.mean + g.sd * rng.normal();
        data.covariates.emplace_back(g.name, DataColumn::numeric(std::move(v)));
        break;
      }
      case CovariateGen::Kind::uniform: {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = rng.uniform(g.lo, g.hi);
        data.covariates.emplace_back(g.name, DataColumn::numeric(std::move(v)));
        break;
      }
      case CovariateGen::Kind::bernoulli: {
        Eigen::VectorXd v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = (rng.uniform01() < g.p) ? 1.0 : 0.0;
        data.covariates.emplace_back(g.name, DataColumn::numeric(std::move(v)));
        break;
      }
      case CovariateGen::Kind::categorical: {
        std::vector<std::string> v(static_cast<std::size_t>(n));
        for (Eigen::Index i = 0; i < n; ++i) {
          const double u = rng.uniform01();
          double acc = 0.0;
          std::size_t pick = g.levels.size() - 1;
          for (std::size_t k = 0; k < g.levels.size(); ++k) {
            acc += g.probs[k];
            if (u < acc) {
              pick = k;
              break;
            }
          }
          v[static_cast<std::size_t>(i)] = g.levels[pick];
        }
        data.covariates.emplace_back(g.name, DataColumn::categorical(std::move(v)));
        break;
      }
    }
  }

  // Placeholder response so the dataset validates while designs are built.
  data.time.setOnes();
  std::fill(data.status.begin(), data.status.end(), Status::event);

  const EncodingMap encoding = encoding_from_generators(spec.covariates);
  const DesignPair designs = build_designs(data, spec.model_spec, encoding);
  if (spec.beta.size() != designs.p() || spec.gamma.size() != designs.q())
    throw InputError("simulate: beta/gamma lengths do not match the design produced by the terms (expected " +
                     std::to_string(designs.p()) + " and " + std::to_string(designs.q()) + ")");
  const LinearPredictors lp = linear_predictors(designs, {spec.beta, spec.gamma});

  SimTruth truth;
  truth.mu = lp.mu;
  truth.sigma = lp.sigma;
  truth.log_r.resize(n);
  truth.log_c.resize(n);

  const std::uint64_t noise_stream = spec.covariates.size();
  Rng surv_rng(stream_seed(spec.seed, noise_stream));
  for (Eigen::Index i = 0; i < n; ++i)
    truth.log_r(i) = lp.mu(i) + lp.sigma(i) * surv_rng.normal();

  switch (spec.censoring.kind) {
    case CensoringSpec::Kind::none:
      truth.log_c.setConstant(std::numeric_limits<double>::infinity());
      break;
    case CensoringSpec::Kind::fixed:
      truth.log_c.setConstant(std::log(spec.censoring.fixed_time));
      break;
    case CensoringSpec::Kind::haft: {
      const DesignPair cens_designs = build_designs(data, spec.censoring.spec, encoding);
      if (spec.censoring.beta.size() != cens_designs.p() ||
          spec.censoring.gamma.size() != cens_designs.q())
        throw InputError("simulate: censoring.beta/gamma lengths do not match the censoring design (expected " +
                         std::to_string(cens_designs.p()) + " and " +
                         std::to_string(cens_designs.q()) + ")");
      const LinearPredictors clp =
          linear_predictors(cens_designs, {spec.censoring.beta, spec.censoring.gamma});
      Rng cens_rng(stream_seed(spec.seed, noise_stream + 1));
      for (Eigen::Index i = 0; i < n; ++i)
        truth.log_c(i) = clp.mu(i) + clp.sigma(i) * cens_rng.normal();
      break;
    }
  }

  for (Eigen::Index i = 0; i < n; ++i) {
    const bool event = truth.log_r(i) < truth.log_c(i);
    data.status[i] = event ? Status::event : Status::censored;
    data.time(i) = std::exp(event ? truth.log_r(i) : truth.log_c(i));
  }
  data.validate();
  return {std::move(data), std::move(truth)};
}

/// Fraction of rows whose time is censored.
inline double censoring_rate(const SurvivalDataset& data) {
  if (data.n() < 1) throw InputError("censoring_rate: empty dataset");
  Eigen::Index censored = 0;
  for (const Status s : data.status)
    if (s == Status::censored) ++censored;
  return static_cast<double>(censored) / static_cast<double>(data.n());
}

}  // namespace haft

#endif  // HAFT_SIMULATE_HPP
