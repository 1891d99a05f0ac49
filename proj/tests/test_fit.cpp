#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "haft/fit.hpp"
#include "support/mc.hpp"
#include "support/optim.hpp"

using namespace haft;

namespace {

DesignPair make_designs(Eigen::Index n, Eigen::Index p, Eigen::Index q, std::uint64_t seed) {
  mc::Sampler sampler(seed);
  DesignPair designs;
  designs.W = Eigen::MatrixXd::Ones(n, p);
  designs.Z = Eigen::MatrixXd::Ones(n, q);
  designs.w_names.assign(1, "(Intercept)");
  designs.z_names.assign(1, "(Intercept)");
  for (Eigen::Index j = 1; j < p; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) designs.W(i, j) = sampler.normal();
    designs.w_names.push_back("w" + std::to_string(j));
  }
  for (Eigen::Index j = 1; j < q; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) designs.Z(i, j) = sampler.normal();
    designs.z_names.push_back("z" + std::to_string(j));
  }
  return designs;
}

Eigen::VectorXd simulate_logtimes(const DesignPair& designs, const HaftParams& params,
                                  mc::Sampler& sampler) {
  const LinearPredictors lp = linear_predictors(designs, params);
  Eigen::VectorXd out(designs.n());
  for (Eigen::Index i = 0; i < designs.n(); ++i)
    out(i) = lp.mu(i) + lp.sigma(i) * sampler.normal();
  return out;
}

std::vector<Status> censor_below(Eigen::VectorXd& logtimes, const Eigen::VectorXd& cutoffs) {
  std::vector<Status> status(logtimes.size(), Status::event);
  for (Eigen::Index i = 0; i < logtimes.size(); ++i) {
    if (cutoffs(i) < logtimes(i)) {
      logtimes(i) = cutoffs(i);
      status[i] = Status::censored;
    }
  }
  return status;
}

Eigen::VectorXd pack(const HaftParams& params) {
  Eigen::VectorXd theta(params.beta.size() + params.gamma.size());
  theta << params.beta, params.gamma;
  return theta;
}

HaftParams unpack(const Eigen::VectorXd& theta, Eigen::Index p) {
  return {theta.head(p), theta.tail(theta.size() - p)};
}

void check_monotone_trace(const std::vector<double>& trace) {
  REQUIRE(trace.size() >= 2);
  for (std::size_t k = 1; k < trace.size(); ++k) {
    CHECK(trace[k] >= trace[k - 1] - 1e-10 * (1.0 + std::abs(trace[k - 1])));
  }
}

}  // namespace

TEST_CASE("complete-data log likelihood matches the Gaussian density") {
  DesignPair one = make_designs(1, 1, 1, 1);
  Eigen::VectorXd y(1);
  y << 0.0;
  HaftParams standard{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  CHECK(loglik_complete(one, standard, y) ==
        Catch::Approx(-0.91893853320467274).epsilon(1e-15));
  y << 2.0;
  CHECK(loglik_complete(one, standard, y) ==
        Catch::Approx(-2.9189385332046727).epsilon(1e-15));

  const DesignPair designs = make_designs(20, 3, 2, 42);
  HaftParams params{Eigen::Vector3d(0.4, -1.1, 0.25), Eigen::Vector2d(0.3, -0.6)};
  mc::Sampler sampler(7);
  const Eigen::VectorXd logtimes = simulate_logtimes(designs, params, sampler);
  const LinearPredictors lp = linear_predictors(designs, params);
  double reference = 0.0;
  for (Eigen::Index i = 0; i < 20; ++i) {
    const double z = (logtimes(i) - lp.mu(i)) / lp.sigma(i);
    reference += std::log(norm_pdf(z) / lp.sigma(i));
  }
  CHECK(loglik_complete(designs, params, logtimes) ==
        Catch::Approx(reference).epsilon(1e-12));

  HaftParams wrong{Eigen::Vector2d::Zero(), Eigen::Vector2d::Zero()};
  CHECK_THROWS_AS(loglik_complete(designs, wrong, logtimes), DomainError);
}

TEST_CASE("observed-data log likelihood: events, censoring, quadrature cross-check") {
  const DesignPair designs = make_designs(15, 2, 2, 11);
  HaftParams params{Eigen::Vector2d(0.2, 0.7), Eigen::Vector2d(-0.4, 0.3)};
  mc::Sampler sampler(12);
  const Eigen::VectorXd logtimes = simulate_logtimes(designs, params, sampler);

  const std::vector<Status> events(15, Status::event);
  CHECK(loglik_observed(designs, params, logtimes, events) ==
        loglik_complete(designs, params, logtimes));

  // one row censored exactly at its own location: survival is 1/2
  DesignPair one = make_designs(1, 1, 1, 1);
  Eigen::VectorXd y(1);
  y << 1.3;
  HaftParams at{Eigen::VectorXd::Constant(1, 1.3), Eigen::VectorXd::Zero(1)};
  CHECK(loglik_observed(one, at, y, {Status::censored}) ==
        Catch::Approx(std::log(0.5)).epsilon(1e-15));

  // each censored contribution is the log of the density mass beyond the cut
  std::vector<Status> status(15, Status::event);
  status[3] = status[8] = status[12] = Status::censored;
  const LinearPredictors lp = linear_predictors(designs, params);
  double reference = 0.0;
  const QuadratureSpec quad;
  for (Eigen::Index i = 0; i < 15; ++i) {
    const double mu = lp.mu(i);
    const double sd = lp.sigma(i);
    if (status[i] == Status::event) {
      reference += std::log(norm_pdf((logtimes(i) - mu) / sd) / sd);
    } else {
      const double mass = integrate(
          [&](double t) { return norm_pdf((t - mu) / sd) / sd; }, logtimes(i),
          std::numeric_limits<double>::infinity(), quad);
      reference += std::log(mass);
    }
  }
  CHECK(loglik_observed(designs, params, logtimes, status) ==
        Catch::Approx(reference).epsilon(1e-8));
}

TEST_CASE("conditional moments of the latent log time") {
  DesignPair one = make_designs(1, 1, 1, 1);
  Eigen::VectorXd y(1);

  // events pass through untouched
  y << 1.7;
  HaftParams standard{Eigen::VectorXd::Zero(1), Eigen::VectorXd::Zero(1)};
  EStepMoments m = e_step(one, standard, y, {Status::event});
  CHECK(m.r_tilde(0) == 1.7);
  CHECK(m.s_tilde(0) == 1.7 * 1.7);

  // censored at the location of a standard normal: mean sqrt(2/pi), E[R^2] = 1
  y << 0.0;
  m = e_step(one, standard, y, {Status::censored});
  CHECK(m.r_tilde(0) == Catch::Approx(0.79788456080286536).epsilon(1e-14));
  CHECK(m.s_tilde(0) == Catch::Approx(1.0).epsilon(1e-14));

  // a cut far below the location leaves the unconditional moments
  y << -40.0;
  m = e_step(one, standard, y, {Status::censored});
  CHECK(m.r_tilde(0) == Catch::Approx(0.0).margin(1e-12));
  CHECK(m.s_tilde(0) == Catch::Approx(1.0).epsilon(1e-12));

  // Jensen's inequality holds across a wide grid of cut points
  for (double a = -30.0; a <= 30.0; a += 0.5) {
    y << a;
    m = e_step(one, standard, y, {Status::censored});
    CHECK(m.s_tilde(0) >= m.r_tilde(0) * m.r_tilde(0));
  }

  // Monte Carlo check of both moments at mu = 3, sigma = 2, cut at 1
  const double mu = 3.0, sd = 2.0, cut = 1.0;
  HaftParams shifted{Eigen::VectorXd::Constant(1, mu),
                     Eigen::VectorXd::Constant(1, 2.0 * std::log(sd))};
  y << cut;
  m = e_step(one, shifted, y, {Status::censored});
  mc::Sampler sampler(551234);
  const int draws = 400000;
  double sum = 0.0, sum_sq = 0.0, sum_fourth = 0.0;
  for (int k = 0; k < draws; ++k) {
    const double r = mu + sd * sampler.trunc_normal_above((cut - mu) / sd);
    sum += r;
    sum_sq += r * r;
    sum_fourth += r * r * r * r;
  }
  const double mean = sum / draws;
  const double mean_sq = sum_sq / draws;
  const double se_mean = std::sqrt((mean_sq - mean * mean) / draws);
  const double se_sq = std::sqrt((sum_fourth / draws - mean_sq * mean_sq) / draws);
  CHECK(m.r_tilde(0) == Catch::Approx(mean).margin(4.0 * se_mean));
  CHECK(m.s_tilde(0) == Catch::Approx(mean_sq).margin(4.0 * se_sq));
}

TEST_CASE("uncensored fit: intercept-only closed form") {
  const Eigen::Index n = 12;
  DesignPair designs = make_designs(n, 1, 1, 3);
  Eigen::VectorXd y(n);
  y << 0.3, -1.2, 2.5, 0.7, -0.4, 1.9, 0.1, -2.2, 0.8, 1.4, -0.9, 0.6;
  const FittedModel model = fit_uncensored(designs, y);
  REQUIRE(model.converged);
  const double mean = y.mean();
  const double variance = (y.array() - mean).square().sum() / n;
  CHECK(model.params.beta(0) == Catch::Approx(mean).epsilon(1e-10));
  CHECK(model.params.gamma(0) == Catch::Approx(std::log(variance)).epsilon(1e-10));
  const double ll = -0.5 * n * (kLog2Pi + std::log(variance) + 1.0);
  CHECK(model.loglik == Catch::Approx(ll).epsilon(1e-10));
  CHECK(model.aic == Catch::Approx(-2.0 * ll + 4.0).epsilon(1e-12));
  CHECK_FALSE(model.censored_fit);
  check_monotone_trace(model.objective_trace);
}

TEST_CASE("uncensored fit agrees with a quasi-Newton maximizer") {
  const Eigen::Index n = 80, p = 2, q = 2;
  const DesignPair designs = make_designs(n, p, q, 909);
  const HaftParams truth{Eigen::Vector2d(1.0, -0.6), Eigen::Vector2d(-0.5, 0.4)};
  mc::Sampler sampler(910);
  const Eigen::VectorXd logtimes = simulate_logtimes(designs, truth, sampler);

  const FittedModel model = fit_uncensored(designs, logtimes);
  REQUIRE(model.converged);
  check_monotone_trace(model.objective_trace);

  const optim::Objective objective = [&](const Eigen::VectorXd& theta) {
    return loglik_complete(designs, unpack(theta, p), logtimes);
  };
  Eigen::VectorXd start = pack(init_params(designs, logtimes));
  start.array() += 0.05;  // start away from the alternating path
  const optim::MaximizeResult reference = optim::maximize_bfgs(objective, start, 2000, 1e-9);
  REQUIRE(reference.converged);
  const Eigen::VectorXd fitted = pack(model.params);
  for (Eigen::Index j = 0; j < fitted.size(); ++j)
    CHECK(fitted(j) == Catch::Approx(reference.x(j)).margin(1e-5));
  CHECK(model.loglik >= reference.value - 1e-8 * (1.0 + std::abs(reference.value)));
}

TEST_CASE("uncensored fit diagnostics") {
  // two points, two location parameters: residuals vanish exactly
  DesignPair tiny = make_designs(2, 2, 1, 5);
  Eigen::VectorXd y2 = tiny.W * Eigen::Vector2d(0.4, 1.5);
  CHECK_THROWS_AS(fit_uncensored(tiny, y2), EstimationError);

  const DesignPair designs = make_designs(40, 2, 2, 77);
  const HaftParams truth{Eigen::Vector2d(0.5, 0.8), Eigen::Vector2d(-0.2, 0.5)};
  mc::Sampler sampler(78);
  const Eigen::VectorXd logtimes = simulate_logtimes(designs, truth, sampler);

  FitControl strangled;
  strangled.max_iter = 1;
  const FittedModel early = fit_uncensored(designs, logtimes, strangled);
  CHECK_FALSE(early.converged);
  CHECK(early.iterations == 1);

  // shifting every response moves only the location intercept
  const FittedModel base = fit_uncensored(designs, logtimes);
  const double c = 3.7;
  const FittedModel shifted = fit_uncensored(designs, (logtimes.array() + c).matrix());
  CHECK(shifted.params.beta(0) == Catch::Approx(base.params.beta(0) + c).epsilon(1e-8));
  CHECK(shifted.params.beta(1) == Catch::Approx(base.params.beta(1)).margin(1e-8));
  CHECK(shifted.params.gamma(0) == Catch::Approx(base.params.gamma(0)).margin(1e-8));
  CHECK(shifted.params.gamma(1) == Catch::Approx(base.params.gamma(1)).margin(1e-8));
}

TEST_CASE("censored fit delegates exactly when every row is an event") {
  const DesignPair designs = make_designs(30, 2, 1, 21);
  const HaftParams truth{Eigen::Vector2d(0.3, 1.0), Eigen::VectorXd::Constant(1, -0.3)};
  mc::Sampler sampler(22);
  const Eigen::VectorXd logtimes = simulate_logtimes(designs, truth, sampler);
  const std::vector<Status> events(30, Status::event);

  const FittedModel direct = fit_uncensored(designs, logtimes);
  const FittedModel via = fit_censored(designs, logtimes, events);
  CHECK(via.params.beta == direct.params.beta);
  CHECK(via.params.gamma == direct.params.gamma);
  CHECK(via.loglik == direct.loglik);
  CHECK(via.iterations == direct.iterations);
  CHECK_FALSE(via.censored_fit);

  const std::vector<Status> censored(30, Status::censored);
  CHECK_THROWS_AS(fit_censored(designs, logtimes, censored), EstimationError);
}

TEST_CASE("censored fit matches the direct maximizer of the observed likelihood") {
  const Eigen::Index n = 120, p = 2, q = 2;
  const DesignPair designs = make_designs(n, p, q, 314);
  const HaftParams truth{Eigen::Vector2d(0.8, -0.5), Eigen::Vector2d(-0.6, 0.35)};
  mc::Sampler sampler(315);
  Eigen::VectorXd logtimes = simulate_logtimes(designs, truth, sampler);
  Eigen::VectorXd cutoffs(n);
  for (Eigen::Index i = 0; i < n; ++i) cutoffs(i) = 0.9 + 0.8 * sampler.normal();
  const std::vector<Status> status = censor_below(logtimes, cutoffs);
  const auto n_censored = std::count(status.begin(), status.end(), Status::censored);
  REQUIRE(n_censored > 20);
  REQUIRE(n_censored < 100);

  const FittedModel model = fit_censored(designs, logtimes, status);
  REQUIRE(model.converged);
  CHECK(model.censored_fit);
  check_monotone_trace(model.objective_trace);

  const optim::Objective objective = [&](const Eigen::VectorXd& theta) {
    return loglik_observed(designs, unpack(theta, p), logtimes, status);
  };
  Eigen::VectorXd start = pack(init_params(designs, logtimes));
  start.array() -= 0.04;
  const optim::MaximizeResult reference = optim::maximize_bfgs(objective, start, 4000, 1e-8);
  REQUIRE(reference.converged);
  const Eigen::VectorXd fitted = pack(model.params);
  for (Eigen::Index j = 0; j < fitted.size(); ++j)
    CHECK(fitted(j) == Catch::Approx(reference.x(j)).margin(1e-4));

  // the observed-likelihood score vanishes at the returned estimate
  const Eigen::VectorXd score = optim::fd_gradient(objective, fitted);
  CHECK(score.lpNorm<Eigen::Infinity>() <= 1e-5 * (1.0 + std::abs(model.loglik)));

  // restarting from the optimum terminates immediately without moving
  const FittedModel resumed = fit_censored(designs, logtimes, status, {}, model.params);
  CHECK(resumed.converged);
  CHECK(detail::param_step_norm(resumed.params, model.params) < 1e-6);

  // a perturbed start reaches the same optimum
  HaftParams nudged = model.params;
  nudged.beta.array() += 0.2;
  nudged.gamma.array() -= 0.15;
  const FittedModel restarted = fit_censored(designs, logtimes, status, {}, nudged);
  REQUIRE(restarted.converged);
  CHECK(detail::param_step_norm(restarted.params, model.params) < 1e-6);
}

TEST_CASE("starting values") {
  const DesignPair designs = make_designs(25, 2, 2, 61);
  mc::Sampler sampler(62);
  const HaftParams truth{Eigen::Vector2d(0.1, 0.9), Eigen::Vector2d(0.2, -0.4)};
  const Eigen::VectorXd logtimes = simulate_logtimes(designs, truth, sampler);

  const HaftParams init = init_params(designs, logtimes);
  const Eigen::VectorXd ols =
      (designs.W.transpose() * designs.W).ldlt().solve(designs.W.transpose() * logtimes);
  CHECK((init.beta - ols).lpNorm<Eigen::Infinity>() < 1e-10);
  const double rss = (logtimes - designs.W * init.beta).squaredNorm();
  CHECK(init.gamma(0) == Catch::Approx(std::log(rss / 25.0)).epsilon(1e-12));
  CHECK(init.gamma(1) == 0.0);

  // no all-ones scale column: the scale starts at zero everywhere
  DesignPair no_ones = designs;
  no_ones.Z.col(0) = designs.Z.col(1);
  CHECK(init_params(no_ones, logtimes).gamma == Eigen::Vector2d::Zero());

  // an identically zero response fits exactly, so the pooled variance is zero
  DesignPair tiny = make_designs(3, 2, 1, 5);
  CHECK_THROWS_AS(init_params(tiny, Eigen::VectorXd::Zero(3)), EstimationError);
}
