#ifndef HAFT_INFERENCE_HPP
#define HAFT_INFERENCE_HPP

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "haft/errors.hpp"
#include "haft/fit.hpp"
#include "haft/model.hpp"
#include "haft/numkernel.hpp"

namespace haft {

/// Negative Hessian of the observed-data log-likelihood at theta, by central
/// finite differences with per-coordinate steps h_j = eps^{1/3} max(1, |t_j|),
/// symmetrized.  For fully observed data the observed and complete
/// log-likelihoods coincide, so one code path serves both fit kinds.
inline Eigen::MatrixXd observed_information(const DesignPair& designs,
                                            const Eigen::VectorXd& logtimes,
                                            const std::vector<Status>& status,
                                            const HaftParams& params) {
  const Eigen::Index p = designs.p();
  const Eigen::Index q = designs.q();
  const Eigen::Index dim = p + q;
  Eigen::VectorXd theta(dim);
  theta.head(p) = params.beta;
  theta.tail(q) = params.gamma;

  auto value = [&](const Eigen::VectorXd& t) {
    HaftParams local;
    local.beta = t.head(p);
    local.gamma = t.tail(q);
    return loglik_observed(designs, local, logtimes, status);
  };

  const double croot = std::cbrt(std::numeric_limits<double>::epsilon());
  Eigen::VectorXd h(dim);
  for (Eigen::Index j = 0; j < dim; ++j) h(j) = croot * std::max(1.0, std::abs(theta(j)));

  const double f0 = value(theta);
  Eigen::MatrixXd hess(dim, dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    Eigen::VectorXd tp = theta, tm = theta;
    tp(j) += h(j);
    tm(j) -= h(j);
    hess(j, j) = (value(tp) - 2.0 * f0 + value(tm)) / (h(j) * h(j));
  }
  for (Eigen::Index j = 0; j < dim; ++j)
    for (Eigen::Index k = j + 1; k < dim; ++k) {
      Eigen::VectorXd tpp = theta, tpm = theta, tmp = theta, tmm = theta;
      tpp(j) += h(j); tpp(k) += h(k);
      tpm(j) += h(j); tpm(k) -= h(k);
      tmp(j) -= h(j); tmp(k) += h(k);
      tmm(j) -= h(j); tmm(k) -= h(k);
      const double mixed =
          (value(tpp) - value(tpm) - value(tmp) + value(tmm)) / (4.0 * h(j) * h(k));
      hess(j, k) = mixed;
      hess(k, j) = mixed;
    }
  Eigen::MatrixXd info = -0.5 * (hess + hess.transpose());
  return info;
}

struct CovarianceResult {
  Eigen::MatrixXd vcov;
  bool clipped = false;  // information had eigenvalues below the floor
};

/// Inverse of the information matrix.  A non-positive-definite information
/// (boundary or weakly identified fit) is repaired by flooring its
/// eigenvalues at 1e-10 and flagged, never hidden.
inline CovarianceResult invert_information(const Eigen::MatrixXd& information) {
  if (information.rows() != information.cols() || information.rows() < 1)
    throw DomainError("invert_information: matrix must be square and nonempty");
  constexpr double kFloor = 1e-10;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eigen(information);
  if (eigen.info() != Eigen::Success)
    throw EstimationError("invert_information: eigendecomposition failed");
  Eigen::VectorXd values = eigen.eigenvalues();
  CovarianceResult out;
  out.clipped = (values.minCoeff() < kFloor);
  for (Eigen::Index j = 0; j < values.size(); ++j) values(j) = std::max(values(j), kFloor);
  out.vcov = eigen.eigenvectors() * values.cwiseInverse().asDiagonal() *
             eigen.eigenvectors().transpose();
  // Exact symmetry, so downstream serialization round-trips cleanly.
  out.vcov = ((out.vcov + out.vcov.transpose()) * 0.5).eval();
  return out;
}

/// Computes and stores the parameter covariance on the model in place.
inline void attach_covariance(FittedModel& model, const DesignPair& designs,
                              const Eigen::VectorXd& logtimes,
                              const std::vector<Status>& status) {
  const Eigen::MatrixXd info = observed_information(designs, logtimes, status, model.params);
  CovarianceResult cov = invert_information(info);
  model.vcov = std::move(cov.vcov);
  model.vcov_clipped = cov.clipped;
}

enum class ParamPart { location, scale };

struct WaldRow {
  std::string name;
  double estimate;
  double std_error;
  double z_value;
  double ci_lower;
  double ci_upper;
  ParamPart part;
};

struct WaldSummary {
  std::vector<WaldRow> rows;
  double confidence_level;
};

/// Per-parameter estimates, standard errors (sqrt of covariance diagonal),
/// and equal-tailed normal-theory confidence intervals.
inline WaldSummary wald_summary(const FittedModel& model, double level = 0.95) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("wald_summary: level must lie in (0, 1)");
  if (!model.vcov)
    throw EstimationError("wald_summary: model has no covariance matrix attached");
  const Eigen::Index p = model.params.beta.size();
  const Eigen::Index q = model.params.gamma.size();
  if (model.vcov->rows() != p + q)
    throw DomainError("wald_summary: covariance dimension does not match parameters");
  const double mult = norm_quantile(1.0 - (1.0 - level) / 2.0);
  WaldSummary out;
  out.confidence_level = level;
  for (Eigen::Index j = 0; j < p + q; ++j) {
    WaldRow row;
    row.part = (j < p) ? ParamPart::location : ParamPart::scale;
    const Eigen::Index local = (j < p) ? j : j - p;
    if (j < p) {
      row.estimate = model.params.beta(local);
      row.name = (local < static_cast<Eigen::Index>(model.w_names.size()))
                     ? model.w_names[local]
                     : ("beta" + std::to_string(local));
    } else {
      row.estimate = model.params.gamma(local);
      row.name = (local < static_cast<Eigen::Index>(model.z_names.size()))
                     ? model.z_names[local]
                     : ("gamma" + std::to_string(local));
    }
    row.std_error = std::sqrt((*model.vcov)(j, j));
    row.z_value = row.estimate / row.std_error;
    row.ci_lower = row.estimate - mult * row.std_error;
    row.ci_upper = row.estimate + mult * row.std_error;
    out.rows.push_back(row);
  }
  return out;
}

/// Akaike information criterion, -2 loglik + 2 (p + q).
inline double aic(const FittedModel& model) {
  const auto dim = static_cast<double>(model.params.beta.size() + model.params.gamma.size());
  return -2.0 * model.loglik + 2.0 * dim;
}

}  // namespace haft

#endif  // HAFT_INFERENCE_HPP
