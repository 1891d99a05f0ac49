#ifndef HAFT_PREDICT_HPP
#define HAFT_PREDICT_HPP

#include <cmath>
#include <vector>

#include <Eigen/Dense>

#include "haft/errors.hpp"
#include "haft/model.hpp"
#include "haft/numkernel.hpp"

namespace haft {

/// P(T > t) for log T ~ N(mu, sigma^2): Phi(-(log t - mu)/sigma).
inline double survival(double t, double mu, double sigma) {
  if (!(t > 0.0)) throw DomainError("survival: time must be strictly positive");
  if (!(sigma > 0.0)) throw DomainError("survival: sigma must be strictly positive");
  return norm_cdf(-(std::log(t) - mu) / sigma);
}

/// Time t with survival(t) = p: exp(mu + sigma * Phi^{-1}(1 - p)).  Total on
/// p in (0, 1) — upper quantiles included.
inline double survival_quantile(double p, double mu, double sigma) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("survival_quantile: p must lie in (0, 1)");
  if (!(sigma > 0.0)) throw DomainError("survival_quantile: sigma must be strictly positive");
  return std::exp(mu + sigma * norm_quantile(1.0 - p));
}

struct PredictionInterval {
  double lower;
  double upper;
  double width;
};

/// Equal-tailed interval for a future time on the log scale:
/// exp(mu -/+ z sigma), z = Phi^{-1}((1 + level)/2).
inline PredictionInterval prediction_interval(double mu, double sigma, double level) {
  if (!(level > 0.0 && level < 1.0))
    throw DomainError("prediction_interval: level must lie in (0, 1)");
  if (!(sigma > 0.0)) throw DomainError("prediction_interval: sigma must be strictly positive");
  const double z = norm_quantile(0.5 * (1.0 + level));
  PredictionInterval out;
  out.lower = std::exp(mu - z * sigma);
  out.upper = std::exp(mu + z * sigma);
  out.width = out.upper - out.lower;
  return out;
}

/// One encoded covariate row: its location-design and scale-design values.
struct EncodedRow {
  Eigen::VectorXd w;
  Eigen::VectorXd z;
};

struct SurvivalCurve {
  std::vector<double> times;
  std::vector<double> survival;
  EncodedRow covariate_row;
};

/// Survival probabilities over a time grid for one covariate row.
inline SurvivalCurve survival_curve(const EncodedRow& row, const FittedModel& model,
                                    const std::vector<double>& grid) {
  if (row.w.size() != model.params.beta.size() || row.z.size() != model.params.gamma.size())
    throw DomainError("survival_curve: row/model dimension mismatch");
  const double mu = row.w.dot(model.params.beta);
  const double sigma = std::exp(0.5 * row.z.dot(model.params.gamma));
  SurvivalCurve curve;
  curve.covariate_row = row;
  curve.times = grid;
  curve.survival.reserve(grid.size());
  for (const double t : grid) curve.survival.push_back(survival(t, mu, sigma));
  return curve;
}

}  // namespace haft

#endif  // HAFT_PREDICT_HPP
