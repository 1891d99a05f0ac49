#ifndef HAFT_RESIDUALS_HPP
#define HAFT_RESIDUALS_HPP

#include <algorithm>
#include <cfloat>
#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "haft/errors.hpp"
#include "haft/fit.hpp"
#include "haft/model.hpp"
#include "haft/numkernel.hpp"
#include "haft/rng.hpp"

namespace haft {

/// Model for the censoring-time distribution p(C | x): the same fitting
/// machinery as the survival model, run with the event indicator flipped.
struct CensoringModel {
  FittedModel model;
};

inline CensoringModel fit_censoring_model(const DesignPair& designs,
                                          const Eigen::VectorXd& logtimes,
                                          const std::vector<Status>& status,
                                          const FitControl& control = {}) {
  return CensoringModel{fit_censored(designs, logtimes, flip_status(status), control)};
}

/// Density of the observed pair (Y, delta) at log-time y, unnormalized over
/// delta: events contribute f_R(y) (1 - F_C(y)), censorings f_C(y) (1 - F_R(y)).
inline double observed_density(double y, Status delta, double mu_r, double sigma_r, double mu_c,
                               double sigma_c) {
  if (!(sigma_r > 0.0) || !(sigma_c > 0.0))
    throw DomainError("observed_density: sigmas must be strictly positive");
  const double ar = (y - mu_r) / sigma_r;
  const double ac = (y - mu_c) / sigma_c;
  if (delta == Status::event) return norm_pdf(ar) / sigma_r * norm_cdf(-ac);
  return norm_pdf(ac) / sigma_c * norm_cdf(-ar);
}

/// P(Y <= y | delta, x): the observed-time density integrated and normalized
/// by its total mass P(delta | x).  The integrand is standardized on the
/// scale of its own density factor so it stays O(1) for every covariate row;
/// the normalizing constant cancels the Jacobian.
inline double observed_cdf(double y, Status delta, double mu_r, double sigma_r, double mu_c,
                           double sigma_c, const QuadratureSpec& quad = {}) {
  if (!(sigma_r > 0.0) || !(sigma_c > 0.0))
    throw DomainError("observed_cdf: sigmas must be strictly positive");
  // Standardize on the density factor's scale: events on the R scale,
  // censorings on the C scale.
  const double own_mu = (delta == Status::event) ? mu_r : mu_c;
  const double own_sigma = (delta == Status::event) ? sigma_r : sigma_c;
  const double other_mu = (delta == Status::event) ? mu_c : mu_r;
  const double other_sigma = (delta == Status::event) ? sigma_c : sigma_r;
  auto integrand = [&](double u) {
    const double t = own_mu + own_sigma * u;  // log-time at standardized u
    return norm_pdf(u) * norm_cdf(-(t - other_mu) / other_sigma);
  };
  // The integrand carries a factor norm_pdf(u), which underflows to exactly
  // zero beyond |u| ~ 38.6, so restricting to [-39, 39] loses nothing and
  // keeps both pieces finite even for cut points arbitrarily far out.
  constexpr double kSupport = 39.0;
  const double cut = std::clamp((y - own_mu) / own_sigma, -kSupport, kSupport);
  const double below = integrate(integrand, -kSupport, cut, quad);
  const double above = integrate(integrand, cut, kSupport, quad);
  const double total = below + above;
  if (!(total > 0.0))
    throw EstimationError("observed_cdf: observed-time density has zero mass");
  return std::clamp(below / total, 0.0, 1.0);
}

struct ResidualReport {
  Eigen::VectorXd residuals;
  std::vector<Status> status;
  double ks_statistic = std::numeric_limits<double>::quiet_NaN();
  double ks_pvalue = std::numeric_limits<double>::quiet_NaN();
  std::vector<bool> outlier;  // |residual| beyond the two-sided 5% normal bound
};

/// One-sample Kolmogorov-Smirnov test of `values` against N(0, 1).
/// The p-value uses the asymptotic Kolmogorov distribution of sqrt(n) D:
/// the Jacobi-theta form for small arguments, the alternating exponential
/// series otherwise.
inline std::pair<double, double> ks_normal(const Eigen::VectorXd& values) {
  const Eigen::Index n = values.size();
  if (n < 8) throw InputError("ks_normal: need at least 8 observations");
  std::vector<double> sorted(values.data(), values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  double d = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const double cdf = norm_cdf(sorted[i]);
    const double lo = static_cast<double>(i) / static_cast<double>(n);
    const double hi = static_cast<double>(i + 1) / static_cast<double>(n);
    d = std::max({d, cdf - lo, hi - cdf});
  }
  const double lambda = std::sqrt(static_cast<double>(n)) * d;
  double pvalue;
  if (lambda < 1.18) {
    // P(K <= x) = sqrt(2 pi)/x sum_{k>=1} exp(-(2k-1)^2 pi^2 / (8 x^2))
    const double base = std::exp(-9.8696044010893586188 / (8.0 * lambda * lambda));
    const double w = std::sqrt(2.0 * 3.14159265358979323846) / lambda;
    pvalue = 1.0 - w * (base + std::pow(base, 9) + std::pow(base, 25) + std::pow(base, 49));
  } else {
    const double e = std::exp(-2.0 * lambda * lambda);
    double sum = 0.0;
    double sign = 1.0;
    for (int k = 1; k <= 100; ++k) {
      const double term = std::pow(e, k * k);
      sum += sign * term;
      if (term < 1e-17) break;
      sign = -sign;
    }
    pvalue = 2.0 * sum;
  }
  return {d, std::clamp(pvalue, 0.0, 1.0)};
}

/// Probability-integral-transform residuals: each observed log-time is mapped
/// through its fitted observed-time CDF and then to a normal quantile.  Under
/// correctly specified survival and censoring models these are approximately
/// standard normal.
inline ResidualReport pit_residuals(const Eigen::VectorXd& logtimes,
                                    const std::vector<Status>& status,
                                    const DesignPair& surv_designs, const FittedModel& surv,
                                    const DesignPair& cens_designs, const CensoringModel& cens,
                                    const QuadratureSpec& quad = {}) {
  const Eigen::Index n = logtimes.size();
  if (static_cast<Eigen::Index>(status.size()) != n || surv_designs.n() != n ||
      cens_designs.n() != n)
    throw DomainError("pit_residuals: row-count mismatch between data and designs");
  if (surv.params.beta.size() == 0 || cens.model.params.beta.size() == 0)
    throw DomainError("pit_residuals: unfitted model");
  const LinearPredictors surv_lp = linear_predictors(surv_designs, surv.params);
  const LinearPredictors cens_lp = linear_predictors(cens_designs, cens.model.params);
  ResidualReport report;
  report.residuals.resize(n);
  report.status = status;
  report.outlier.resize(n);
  const double outlier_bound = norm_quantile(1.0 - 0.025);
  for (Eigen::Index i = 0; i < n; ++i) {
    double u = observed_cdf(logtimes(i), status[i], surv_lp.mu(i), surv_lp.sigma(i),
                            cens_lp.mu(i), cens_lp.sigma(i), quad);
    u = std::clamp(u, 1e-15, 1.0 - 1e-15);
    report.residuals(i) = norm_quantile(u);
    report.outlier[i] = std::abs(report.residuals(i)) > outlier_bound;
  }
  const auto [d, p] = ks_normal(report.residuals);
  report.ks_statistic = d;
  report.ks_pvalue = p;
  return report;
}

/// Imputation residuals: events are standardized directly; censored rows
/// draw the latent log-time from its truncated conditional distribution
/// (inverse-CDF sampling in the upper tail, stable far out) and standardize
/// the draw.  Deterministic for a fixed seed.
inline Eigen::VectorXd hillis_residuals(const Eigen::VectorXd& logtimes,
                                        const std::vector<Status>& status,
                                        const Eigen::VectorXd& mu, const Eigen::VectorXd& sigma,
                                        std::uint64_t seed) {
  const Eigen::Index n = logtimes.size();
  if (static_cast<Eigen::Index>(status.size()) != n || mu.size() != n || sigma.size() != n)
    throw DomainError("hillis_residuals: dimension mismatch");
  Rng rng(stream_seed(seed, 0));
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = (logtimes(i) - mu(i)) / sigma(i);
    if (status[i] == Status::event) {
      out(i) = a;
      continue;
    }
    // Tail inversion: survival value s uniform on (0, Phi(-a)) maps to
    // z = -Phi^{-1}(s), which always lands in (a, inf).
    const double tail = norm_cdf(-a);
    const double s = rng.uniform01() * tail;
    double z = (s >= DBL_MIN) ? -norm_quantile(s) : a;
    if (!(z > a)) z = std::nextafter(a, std::numeric_limits<double>::infinity());
    out(i) = z;
  }
  return out;
}

}  // namespace haft

#endif  // HAFT_RESIDUALS_HPP
