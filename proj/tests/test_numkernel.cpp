#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "haft/numkernel.hpp"
#include "support/mc.hpp"

using namespace haft;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST_CASE("normal pdf and cdf basics") {
  CHECK(norm_pdf(0.0) == Catch::Approx(0.39894228040143268).epsilon(1e-14));
  CHECK(norm_pdf(1.7) == Catch::Approx(norm_pdf(-1.7)).epsilon(1e-15));
  CHECK(norm_cdf(0.0) == Catch::Approx(0.5).margin(1e-16));
  CHECK(norm_cdf(-5.0) == Catch::Approx(2.8665157187919391e-07).epsilon(1e-13));
  // monotone on a coarse grid
  double prev = 0.0;
  for (double a = -8.0; a <= 8.0; a += 0.25) {
    const double cur = norm_cdf(a);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("normal quantile inverts the cdf across the full range") {
  CHECK(norm_quantile(0.975) == Catch::Approx(1.9599639845400542).epsilon(1e-12));
  CHECK(norm_quantile(0.5) == Catch::Approx(0.0).margin(1e-15));
  CHECK(norm_quantile(1e-10) == Catch::Approx(-6.3613409024040562).epsilon(1e-12));
  const std::vector<double> ps = {1e-12, 1e-9, 1e-4, 0.025, 0.3, 0.5,
                                  0.8,   0.975, 1 - 1e-4, 1 - 1e-9, 1 - 1e-12};
  for (const double p : ps)
    CHECK(std::abs(norm_cdf(norm_quantile(p)) - p) <= 1e-12);
  CHECK_THROWS_AS(norm_quantile(0.0), DomainError);
  CHECK_THROWS_AS(norm_quantile(1.0), DomainError);
  CHECK_THROWS_AS(norm_quantile(-0.3), DomainError);
}

TEST_CASE("log cdf is stable far into the lower tail") {
  CHECK(log_norm_cdf(2.0) == Catch::Approx(-0.023012909328963488).epsilon(1e-13));
  CHECK(log_norm_cdf(-5.0) == Catch::Approx(-15.064998393988726).epsilon(1e-13));
  CHECK(log_norm_cdf(-40.0) == Catch::Approx(-804.60844201375379).epsilon(1e-13));
  // agrees with the naive form where that form is healthy (the naive log of
  // a cdf near 1 keeps only ~1e-10 relative accuracy, hence the tolerance)
  for (double a = -8.0; a <= 8.0; a += 0.5)
    CHECK(log_norm_cdf(a) ==
          Catch::Approx(std::log(norm_cdf(a))).epsilon(1e-10).margin(1e-13));
}

TEST_CASE("scaled complementary error function across its branches") {
  CHECK(erfcx(0.0) == Catch::Approx(1.0).epsilon(1e-15));
  CHECK(erfcx(1.0) == Catch::Approx(0.42758357615580700).epsilon(1e-14));
  CHECK(erfcx(26.0) == Catch::Approx(0.021683584850562907).epsilon(1e-13));
  CHECK(erfcx(30.0) == Catch::Approx(0.018795888861416751).epsilon(1e-13));
  // both branches of the series switch at 25 agree with the reference values
  CHECK(erfcx(24.999999) == Catch::Approx(0.022549573333186858).epsilon(1e-12));
  CHECK(erfcx(25.000001) == Catch::Approx(0.022549571532095931).epsilon(1e-12));
  // negative branch: erfcx(-x) = 2 exp(x^2) - erfcx(x)
  CHECK(erfcx(-1.0) == Catch::Approx(2.0 * std::exp(1.0) - 0.42758357615580700).epsilon(1e-13));
}

TEST_CASE("inverse Mills ratio: values, tails, bounds") {
  CHECK(inv_mills_f(0.0) == Catch::Approx(0.79788456080286536).epsilon(1e-14));
  CHECK(inv_mills_f(5.0) == Catch::Approx(5.1865039671258421).epsilon(1e-13));
  CHECK(inv_mills_f(37.0) == Catch::Approx(37.026987686126990).epsilon(1e-13));
  CHECK(inv_mills_f(100.0) == Catch::Approx(100.00999800099926).epsilon(1e-13));
  CHECK(std::abs(inv_mills_f(-30.0)) <= 1e-15);
  for (double a = -8.0; a <= 40.0; a += 0.37) {
    const double v = inv_mills_f(a);
    CHECK(std::isfinite(v));
    CHECK(v > std::max(a, 0.0));
  }
  CHECK_THROWS_AS(inv_mills_f(kInf), DomainError);
  CHECK_THROWS_AS(inv_mills_f(std::nan("")), DomainError);
}

TEST_CASE("truncated second moment: values and the defining identity") {
  CHECK(trunc_second_moment_g(0.0) == Catch::Approx(1.0).epsilon(1e-14));
  CHECK(trunc_second_moment_g(0.5) == Catch::Approx(1.5705388851840322).epsilon(1e-13));
  CHECK(trunc_second_moment_g(3.0) == Catch::Approx(10.849295964791310).epsilon(1e-13));
  CHECK(trunc_second_moment_g(-30.0) == Catch::Approx(1.0).margin(1e-12));
  for (double a = -30.0; a <= 30.0; a += 0.61) {
    const double g = trunc_second_moment_g(a);
    const double identity = 1.0 + a * inv_mills_f(a);
    CHECK(g == Catch::Approx(identity).epsilon(1e-12));
    CHECK(g > 0.0);
    // the conditional support excludes (-inf, a) only when a >= 0, so the
    // second moment dominates a^2 exactly there (for a << 0 it tends to 1)
    if (a >= 0.0) {
      CHECK(g > a * a);
      CHECK(g >= 1.0);
    }
  }
  CHECK_THROWS_AS(trunc_second_moment_g(-kInf), DomainError);
}

// Scaled-down version of the full Monte Carlo sweep the acceptance suite
// runs: fewer grid points and draws, same rejection-sampling oracle.
TEST_CASE("truncated moments match rejection-sampling Monte Carlo") {
  mc::Sampler sampler(914001u);
  for (double a = -8.0; a <= 8.001; a += 1.0) {
    const int n = 200000;
    double sum = 0.0, sum_sq = 0.0, sum_4 = 0.0;
    for (int i = 0; i < n; ++i) {
      const double z = sampler.trunc_normal_above(a);
      sum += z;
      sum_sq += z * z;
      sum_4 += z * z * z * z;
    }
    const double mean = sum / n;
    const double mean_sq = sum_sq / n;
    const double se_mean = std::sqrt(std::max(0.0, mean_sq - mean * mean) / n);
    const double se_sq = std::sqrt(std::max(0.0, sum_4 / n - mean_sq * mean_sq) / n);
    INFO("a = " << a);
    CHECK(std::abs(mean - inv_mills_f(a)) <= 4.0 * se_mean);
    CHECK(std::abs(mean_sq - trunc_second_moment_g(a)) <= 4.0 * se_sq);
  }
}

TEST_CASE("quadrature: finite, half-infinite, and doubly infinite ranges") {
  const QuadratureSpec spec;
  CHECK(integrate([](double x) { return x * x; }, 0.0, 1.0, spec) ==
        Catch::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(integrate([](double x) { return norm_pdf(x); }, -kInf, kInf, spec) ==
        Catch::Approx(1.0).margin(1e-10));
  for (const double c : {-3.0, 0.0, 2.0})
    CHECK(integrate([](double x) { return norm_pdf(x); }, -kInf, c, spec) ==
          Catch::Approx(norm_cdf(c)).margin(1e-9));
  CHECK(integrate([](double x) { return norm_pdf(x); }, 1.0, kInf, spec) ==
        Catch::Approx(norm_cdf(-1.0)).margin(1e-10));
  CHECK(integrate([](double x) { return std::exp(-x); }, 0.0, kInf, spec) ==
        Catch::Approx(1.0).epsilon(1e-10));
  // the closed-form cross-product moment used by the residual tests
  CHECK(integrate([](double x) { return norm_pdf(x) * norm_cdf(-x); }, -kInf, 0.0, spec) ==
        Catch::Approx(0.375).margin(1e-10));
  CHECK(integrate([](double) { return 1.0; }, 2.0, 2.0, spec) == 0.0);
}

TEST_CASE("quadrature failure carries its best estimate") {
  QuadratureSpec tight;
  tight.abs_tol = 1e-14;
  tight.rel_tol = 1e-14;
  tight.max_subdivisions = 2;
  bool threw = false;
  try {
    integrate([](double x) { return std::sin(50.0 * x) * std::sin(50.0 * x) / (1e-3 + x * x); },
              -1.0, 1.0, tight);
  } catch (const QuadratureError& e) {
    threw = true;
    CHECK(std::isfinite(e.best_estimate()));
    CHECK(e.error_estimate() > 0.0);
  }
  CHECK(threw);
  QuadratureSpec bad;
  bad.abs_tol = -1.0;
  CHECK_THROWS_AS(integrate([](double x) { return x; }, 0.0, 1.0, bad), DomainError);
  CHECK_THROWS_AS(integrate([](double x) { return x; }, 1.0, 0.0, QuadratureSpec{}), DomainError);
}

TEST_CASE("weighted least squares: closed forms and the independent oracle") {
  {
    WlsProblem problem;
    problem.design = Eigen::MatrixXd::Ones(2, 1);
    problem.response = Eigen::Vector2d(0.0, 2.0);
    problem.weights = Eigen::Vector2d(1.0, 1.0);
    CHECK(solve_wls(problem)(0) == Catch::Approx(1.0).epsilon(1e-14));
    problem.weights = Eigen::Vector2d(3.0, 1.0);
    CHECK(solve_wls(problem)(0) == Catch::Approx(0.5).epsilon(1e-14));
  }
  {
    // random 20x3 against the normal-equation solve
    std::mt19937_64 gen(5150u);
    auto unif = [&gen] { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
    WlsProblem problem;
    problem.design.resize(20, 3);
    problem.response.resize(20);
    problem.weights.resize(20);
    for (int i = 0; i < 20; ++i) {
      problem.design(i, 0) = 1.0;
      problem.design(i, 1) = 2.0 * unif() - 1.0;
      problem.design(i, 2) = 2.0 * unif() - 1.0;
      problem.response(i) = unif() * 4.0;
      problem.weights(i) = 0.25 + unif();
    }
    const Eigen::MatrixXd wd = problem.weights.asDiagonal() * problem.design;
    const Eigen::Vector3d oracle =
        (problem.design.transpose() * wd)
            .ldlt()
            .solve(problem.design.transpose() * problem.weights.asDiagonal() * problem.response);
    const Eigen::VectorXd mine = solve_wls(problem);
    CHECK((mine - oracle).norm() <= 1e-10 * oracle.norm());
    // residual orthogonality in the weighted inner product
    const Eigen::VectorXd resid = problem.response - problem.design * mine;
    const Eigen::VectorXd score = problem.design.transpose() * (problem.weights.asDiagonal() * resid);
    const Eigen::VectorXd rhs =
        problem.design.transpose() * (problem.weights.asDiagonal() * problem.response);
    CHECK(score.lpNorm<Eigen::Infinity>() <= 1e-8 * rhs.lpNorm<Eigen::Infinity>());
  }
}

TEST_CASE("weighted least squares rejects bad inputs and names dependent columns") {
  WlsProblem problem;
  problem.design.resize(4, 2);
  problem.design << 1, 2, 1, 2, 1, 2, 1, 2;  // second column = 2 * first
  problem.response = Eigen::Vector4d(1, 2, 3, 4);
  problem.weights = Eigen::Vector4d::Ones();
  const std::vector<std::string> names = {"(Intercept)", "double_col"};
  bool threw = false;
  try {
    solve_wls(problem, &names);
  } catch (const SingularError& e) {
    threw = true;
    REQUIRE(e.columns().size() == 1);
    const std::string offender = e.columns()[0];
    CHECK((offender == "(Intercept)" || offender == "double_col"));
  }
  CHECK(threw);

  problem.design.setRandom(4, 2);
  problem.weights(2) = 0.0;
  CHECK_THROWS_AS(solve_wls(problem), DomainError);
  problem.weights(2) = -1.0;
  CHECK_THROWS_AS(solve_wls(problem), DomainError);
  problem.weights(2) = 1.0;
  problem.response.resize(3);
  CHECK_THROWS_AS(solve_wls(problem), DomainError);
}

TEST_CASE("gamma log-link fit: closed forms") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(3, 1);
  Eigen::VectorXd u(3);
  u << 1.0, 3.0, 8.0;
  GammaGlmResult res = fit_gamma_loglink(u, z, Eigen::VectorXd::Zero(1));
  CHECK(res.converged);
  CHECK(res.gamma(0) == Catch::Approx(std::log(4.0)).epsilon(1e-12));

  u.setConstant(2.5);
  res = fit_gamma_loglink(u, z, Eigen::VectorXd::Zero(1));
  CHECK(res.converged);
  CHECK(res.gamma(0) == Catch::Approx(std::log(2.5)).epsilon(1e-12));
}

TEST_CASE("gamma log-link fit matches grid refinement on a 2-parameter problem") {
  std::mt19937_64 gen(7341u);
  auto unif = [&gen] { return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53; };
  const int n = 30;
  Eigen::MatrixXd z(n, 2);
  Eigen::VectorXd u(n);
  for (int i = 0; i < n; ++i) {
    z(i, 0) = 1.0;
    z(i, 1) = 2.0 * unif() - 1.0;
    const double eta = 0.4 + 0.8 * z(i, 1);
    // chi-square(1)-like responses with the right mean structure
    const double draw = unif();
    const double normal = std::sqrt(-2.0 * std::log(draw)) * std::cos(6.283185307179586 * unif());
    u(i) = std::exp(eta) * normal * normal;
  }
  const GammaGlmResult res = fit_gamma_loglink(u, z, Eigen::VectorXd::Zero(2), 1e-12, 100);
  REQUIRE(res.converged);

  auto objective = [&](double g0, double g1) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double eta = g0 + g1 * z(i, 1);
      total += u(i) * std::exp(-eta) + eta;
    }
    return -0.5 * total;
  };
  // successive grid refinement, independent of any gradient information
  double c0 = 0.0, c1 = 0.0, half = 4.0;
  for (int round = 0; round < 30; ++round) {
    double best = -std::numeric_limits<double>::infinity(), b0 = c0, b1 = c1;
    for (int i = -10; i <= 10; ++i)
      for (int j = -10; j <= 10; ++j) {
        const double v0 = c0 + half * i / 10.0;
        const double v1 = c1 + half * j / 10.0;
        const double value = objective(v0, v1);
        if (value > best) {
          best = value;
          b0 = v0;
          b1 = v1;
        }
      }
    c0 = b0;
    c1 = b1;
    half *= 0.35;
  }
  CHECK(res.gamma(0) == Catch::Approx(c0).margin(1e-6));
  CHECK(res.gamma(1) == Catch::Approx(c1).margin(1e-6));

  // local maximality: no direction in a small ball improves the objective
  const double at_opt = objective(res.gamma(0), res.gamma(1));
  std::mt19937_64 ball(99u);
  auto bunif = [&ball] { return (static_cast<double>(ball() >> 11) + 0.5) * 0x1.0p-53; };
  for (int k = 0; k < 100; ++k) {
    const double angle = 6.283185307179586 * bunif();
    CHECK(objective(res.gamma(0) + 1e-3 * std::cos(angle),
                    res.gamma(1) + 1e-3 * std::sin(angle)) <= at_opt + 1e-12);
  }
}

TEST_CASE("gamma log-link fit diagnostics and input validation") {
  Eigen::MatrixXd z = Eigen::MatrixXd::Ones(4, 1);
  Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(fit_gamma_loglink(u, z, Eigen::VectorXd::Zero(1)), EstimationError);
  u << 1.0, 2.0, 3.0, 4.0;
  u(0) = -1.0;
  CHECK_THROWS_AS(fit_gamma_loglink(u, z, Eigen::VectorXd::Zero(1)), DomainError);
  u(0) = 1.0;

  // non-convergence is a diagnostic result, not an exception
  Eigen::VectorXd far_start = Eigen::VectorXd::Constant(1, 40.0);
  const GammaGlmResult res = fit_gamma_loglink(u, z, far_start, 1e-14, 1);
  CHECK_FALSE(res.converged);
  CHECK(res.iterations == 1);
  CHECK(std::isfinite(res.grad_norm));

  Eigen::MatrixXd zdup(4, 2);
  zdup << 1, 1, 1, 1, 1, 1, 1, 1;
  CHECK_THROWS_AS(fit_gamma_loglink(u, zdup, Eigen::VectorXd::Zero(2)), SingularError);
}
