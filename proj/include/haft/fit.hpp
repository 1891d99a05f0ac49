#ifndef HAFT_FIT_HPP
#define HAFT_FIT_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "haft/errors.hpp"
#include "haft/model.hpp"
#include "haft/numkernel.hpp"

namespace haft {

inline constexpr double kLog2Pi = 1.8378770664093454835606594;  // log(2*pi)

struct FitControl {
  double tol = 1e-8;           // relative objective change at convergence
  int max_iter = 500;          // outer sweeps
  double inner_glm_tol = 1e-10;
  int inner_glm_max_iter = 50;

  void validate() const {
    if (!(tol > 0.0) || max_iter < 1 || !(inner_glm_tol > 0.0) || inner_glm_max_iter < 1)
      throw DomainError("FitControl: tolerances must be positive, iteration caps >= 1");
  }
};

/// Full Gaussian log-likelihood of the log-times:
///   -1/2 sum_i [ (r_i - w_i'b)^2 e^{-z_i'g} + z_i'g ] - (n/2) log(2 pi).
inline double loglik_complete(const DesignPair& designs, const HaftParams& params,
                              const Eigen::VectorXd& logtimes) {
  if (params.beta.size() != designs.p() || params.gamma.size() != designs.q() ||
      logtimes.size() != designs.n())
    throw DomainError("loglik_complete: dimension mismatch");
  // Summed row by row with the same expression as the event branch of
  // loglik_observed, so the two agree bitwise on fully observed data.
  const Eigen::VectorXd mu = designs.W * params.beta;
  const Eigen::ArrayXd eta = (designs.Z * params.gamma).array();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < designs.n(); ++i) {
    const double sd = std::exp(0.5 * eta(i));
    const double xi = (logtimes(i) - mu(i)) / sd;
    ll += -0.5 * xi * xi - 0.5 * kLog2Pi - 0.5 * eta(i);
  }
  return ll;
}

/// Right-censored Gaussian log-likelihood: density terms for events, upper
/// tail probabilities (via the stable log-CDF) for censored rows.
inline double loglik_observed(const DesignPair& designs, const HaftParams& params,
                              const Eigen::VectorXd& logtimes, const std::vector<Status>& status) {
  if (params.beta.size() != designs.p() || params.gamma.size() != designs.q() ||
      logtimes.size() != designs.n() ||
      static_cast<Eigen::Index>(status.size()) != designs.n())
    throw DomainError("loglik_observed: dimension mismatch");
  const Eigen::VectorXd mu = designs.W * params.beta;
  const Eigen::ArrayXd eta = (designs.Z * params.gamma).array();
  double ll = 0.0;
  for (Eigen::Index i = 0; i < designs.n(); ++i) {
    const double sd = std::exp(0.5 * eta(i));
    const double xi = (logtimes(i) - mu(i)) / sd;
    if (status[i] == Status::event)
      ll += -0.5 * xi * xi - 0.5 * kLog2Pi - 0.5 * eta(i);
    else
      ll += log_norm_cdf(-xi);
  }
  return ll;
}

/// Conditional moments of the latent log survival time given the observed
/// data: identity for events, truncated-normal mean and second moment for
/// censored rows.
struct EStepMoments {
  Eigen::VectorXd r_tilde;  // E[R | data]
  Eigen::VectorXd s_tilde;  // E[R^2 | data]
};

inline EStepMoments e_step(const DesignPair& designs, const HaftParams& params,
                           const Eigen::VectorXd& logtimes, const std::vector<Status>& status) {
  if (params.beta.size() != designs.p() || params.gamma.size() != designs.q() ||
      logtimes.size() != designs.n() ||
      static_cast<Eigen::Index>(status.size()) != designs.n())
    throw DomainError("e_step: dimension mismatch");
  const Eigen::VectorXd mu = designs.W * params.beta;
  const Eigen::ArrayXd eta = (designs.Z * params.gamma).array();
  EStepMoments out;
  out.r_tilde.resize(designs.n());
  out.s_tilde.resize(designs.n());
  for (Eigen::Index i = 0; i < designs.n(); ++i) {
    const double y = logtimes(i);
    if (status[i] == Status::event) {
      out.r_tilde(i) = y;
      out.s_tilde(i) = y * y;
      continue;
    }
    const double sd = std::exp(0.5 * eta(i));
    const double a = (y - mu(i)) / sd;
    const double f = inv_mills_f(a);
    const double mean = mu(i) + sd * f;
    // Second moment assembled as mean^2 + variance; the truncated-normal
    // variance term 1 + a f - f^2 is clamped at zero so Jensen's inequality
    // survives round-off in the deep tail.
    const double var_term = std::max(0.0, 1.0 + a * f - f * f);
    out.r_tilde(i) = mean;
    out.s_tilde(i) = mean * mean + sd * sd * var_term;
  }
  return out;
}

/// Starting values: unweighted least squares for beta (censored rows entered
/// as if observed), pooled log residual variance on the scale intercept.
inline HaftParams init_params(const DesignPair& designs, const Eigen::VectorXd& logtimes) {
  if (logtimes.size() != designs.n()) throw DomainError("init_params: dimension mismatch");
  HaftParams params;
  params.beta = solve_wls({designs.W, logtimes, Eigen::VectorXd::Ones(designs.n())},
                          &designs.w_names);
  const double rss = (logtimes - designs.W * params.beta).squaredNorm();
  const double var = rss / static_cast<double>(designs.n());
  params.gamma = Eigen::VectorXd::Zero(designs.q());
  // The scale intercept, when present, is a constant-one column.
  for (Eigen::Index j = 0; j < designs.q(); ++j) {
    if ((designs.Z.col(j).array() == 1.0).all()) {
      if (!(var > 0.0))
        throw EstimationError("init_params: residuals are identically zero (perfect fit)");
      params.gamma(j) = std::log(var);
      break;
    }
  }
  return params;
}

namespace detail {

inline bool small_relative_change(double previous, double current, double tol) {
  return std::abs(current - previous) <= tol * (1.0 + std::abs(current));
}

inline double param_step_norm(const HaftParams& a, const HaftParams& b) {
  const double db = (a.beta - b.beta).lpNorm<Eigen::Infinity>();
  const double dg = (a.gamma - b.gamma).lpNorm<Eigen::Infinity>();
  return std::max(db, dg);
}

}  // namespace detail

/// Complete-data maximum likelihood by exact coordinate maximization:
/// weighted least squares for beta given gamma, the Gamma log-link profile
/// for gamma given beta.  Each half-step maximizes its conditional
/// likelihood exactly, so the objective never decreases.
///
/// Convergence requires both a small relative objective change and a small
/// parameter step, so one further sweep from the returned estimate moves
/// every coordinate by well under 10x the tolerance.
inline FittedModel fit_uncensored(const DesignPair& designs, const Eigen::VectorXd& logtimes,
                                  const FitControl& control = {},
                                  const std::optional<HaftParams>& init = std::nullopt) {
  control.validate();
  if (logtimes.size() != designs.n()) throw DomainError("fit_uncensored: dimension mismatch");
  if (designs.n() < std::max(designs.p(), designs.q()))
    throw EstimationError("fit_uncensored: fewer rows than parameters");

  FittedModel model;
  model.w_names = designs.w_names;
  model.z_names = designs.z_names;
  model.n = designs.n();
  model.censored_fit = false;
  model.params = init ? *init : init_params(designs, logtimes);
  if (model.params.beta.size() != designs.p() || model.params.gamma.size() != designs.q())
    throw DomainError("fit_uncensored: init parameter dimension mismatch");

  double objective = loglik_complete(designs, model.params, logtimes);
  model.objective_trace.push_back(objective);
  for (int iter = 1; iter <= control.max_iter; ++iter) {
    const HaftParams previous = model.params;
    const Eigen::VectorXd weights =
        (-(designs.Z * model.params.gamma).array()).exp().matrix();
    model.params.beta = solve_wls({designs.W, logtimes, weights}, &designs.w_names);
    const Eigen::ArrayXd resid = (logtimes - designs.W * model.params.beta).array();
    const Eigen::VectorXd u = resid.square().matrix();
    if (u.maxCoeff() <= 0.0)
      throw EstimationError(
          "fit_uncensored: residuals identically zero (perfect fit); likelihood is unbounded");
    const GammaGlmResult glm = fit_gamma_loglink(u, designs.Z, model.params.gamma,
                                                 control.inner_glm_tol, control.inner_glm_max_iter);
    model.params.gamma = glm.gamma;
    const double updated = loglik_complete(designs, model.params, logtimes);
    model.objective_trace.push_back(updated);
    model.iterations = iter;
    if (detail::small_relative_change(objective, updated, control.tol) &&
        detail::param_step_norm(model.params, previous) <= 5.0 * control.tol) {
      model.converged = true;
      objective = updated;
      break;
    }
    objective = updated;
  }
  model.loglik = objective;
  model.aic = -2.0 * objective + 2.0 * static_cast<double>(designs.p() + designs.q());
  return model;
}

/// Censored maximum likelihood via expectation-conditional-maximization:
/// conditional moments of the latent log times, then the same two
/// conditional maximizations as the complete-data fit, run on those moments.
/// With no censored rows this delegates to fit_uncensored (identical output).
inline FittedModel fit_censored(const DesignPair& designs, const Eigen::VectorXd& logtimes,
                                const std::vector<Status>& status, const FitControl& control = {},
                                const std::optional<HaftParams>& init = std::nullopt) {
  control.validate();
  if (logtimes.size() != designs.n() ||
      static_cast<Eigen::Index>(status.size()) != designs.n())
    throw DomainError("fit_censored: dimension mismatch");
  const auto n_events = static_cast<Eigen::Index>(
      std::count(status.begin(), status.end(), Status::event));
  if (n_events == designs.n()) return fit_uncensored(designs, logtimes, control, init);
  if (n_events == 0)
    throw EstimationError(
        "fit_censored: every row is censored; the likelihood is unbounded in the location");
  if (designs.n() < std::max(designs.p(), designs.q()))
    throw EstimationError("fit_censored: fewer rows than parameters");

  FittedModel model;
  model.w_names = designs.w_names;
  model.z_names = designs.z_names;
  model.n = designs.n();
  model.censored_fit = true;
  model.params = init ? *init : init_params(designs, logtimes);
  if (model.params.beta.size() != designs.p() || model.params.gamma.size() != designs.q())
    throw DomainError("fit_censored: init parameter dimension mismatch");

  double objective = loglik_observed(designs, model.params, logtimes, status);
  model.objective_trace.push_back(objective);
  for (int iter = 1; iter <= control.max_iter; ++iter) {
    const HaftParams previous = model.params;
    const EStepMoments moments = e_step(designs, model.params, logtimes, status);
    const Eigen::VectorXd weights =
        (-(designs.Z * model.params.gamma).array()).exp().matrix();
    model.params.beta = solve_wls({designs.W, moments.r_tilde, weights}, &designs.w_names);
    const Eigen::ArrayXd fitted = (designs.W * model.params.beta).array();
    // E[(R - w'b)^2 | data] for the new beta; clamp guards round-off on
    // near-degenerate rows.
    const Eigen::VectorXd u =
        (moments.s_tilde.array() - 2.0 * moments.r_tilde.array() * fitted + fitted.square())
            .max(0.0)
            .matrix();
    if (u.maxCoeff() <= 0.0)
      throw EstimationError("fit_censored: degenerate E-step (all conditional residuals zero)");
    const GammaGlmResult glm = fit_gamma_loglink(u, designs.Z, model.params.gamma,
                                                 control.inner_glm_tol, control.inner_glm_max_iter);
    model.params.gamma = glm.gamma;
    const double updated = loglik_observed(designs, model.params, logtimes, status);
    model.objective_trace.push_back(updated);
    model.iterations = iter;
    if (detail::small_relative_change(objective, updated, control.tol) &&
        detail::param_step_norm(model.params, previous) <= 5.0 * control.tol) {
      model.converged = true;
      objective = updated;
      break;
    }
    objective = updated;
  }
  model.loglik = objective;
  model.aic = -2.0 * objective + 2.0 * static_cast<double>(designs.p() + designs.q());
  return model;
}

}  // namespace haft

#endif  // HAFT_FIT_HPP
