#ifndef HAFT_NUMKERNEL_HPP
#define HAFT_NUMKERNEL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <queue>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "haft/errors.hpp"

namespace haft {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779399461;  // 1/sqrt(2*pi)
inline constexpr double kSqrt2 = 1.4142135623730950488016887;
inline constexpr double kSqrtPi = 1.7724538509055160272981675;

/// Standard normal density.
inline double norm_pdf(double a) { return kInvSqrt2Pi * std::exp(-0.5 * a * a); }

/// Standard normal CDF via the complementary error function.
inline double norm_cdf(double a) { return 0.5 * std::erfc(-a / kSqrt2); }

/// Scaled complementary error function exp(x^2) * erfc(x).
///
/// For x in [0, 25] the direct product is safe: erfc(25) ~ 8e-274 is still a
/// normal double and exp(625) does not overflow.  Beyond that the product
/// degenerates, so we switch to the asymptotic expansion
///   erfcx(x) ~ 1/(x sqrt(pi)) * sum_k (-1)^k (2k-1)!! / (2x^2)^k,
/// which reaches machine precision within ~8 terms for x >= 25
/// (Abramowitz & Stegun 7.1.23).
inline double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) {
    // erfcx(-x) = 2 exp(x^2) - erfcx(x); overflows for x < -26.6.
    double e = std::exp(x * x);
    if (!std::isfinite(e)) return std::numeric_limits<double>::infinity();
    return 2.0 * e - erfcx(-x);
  }
  if (x <= 25.0) return std::exp(x * x) * std::erfc(x);
  const double inv2x2 = 1.0 / (2.0 * x * x);
  double term = 1.0;
  double sum = 1.0;
  for (int k = 1; k <= 16; ++k) {
    term *= -static_cast<double>(2 * k - 1) * inv2x2;
    sum += term;
    if (std::abs(term) < 1e-17 * std::abs(sum)) break;
  }
  return sum / (x * kSqrtPi);
}

/// log Phi(a), stable over the whole real line.
inline double log_norm_cdf(double a) {
  if (a >= 0.0) return std::log1p(-0.5 * std::erfc(a / kSqrt2));
  // Phi(a) = 0.5 * erfcx(-a/sqrt(2)) * exp(-a^2/2) for a < 0.
  return std::log(0.5 * erfcx(-a / kSqrt2)) - 0.5 * a * a;
}

/// Standard normal quantile, algorithm AS 241 (Wichura 1988), accurate to
/// full double precision over (0, 1) including the extreme tails.
inline double norm_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("norm_quantile: p must lie strictly in (0, 1)");
  const double q = p - 0.5;
  if (std::abs(q) <= 0.425) {
    const double r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  double r = (q < 0.0) ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                  2.41780725177450611770e-1) * r + 1.27045825245236838258e+0) * r +
                3.64784832476320460504e+0) * r + 5.76949722146069140550e+0) * r +
              4.63033784615654529590e+0) * r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                  1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                6.89767334985100004550e-1) * r + 1.67638483018380384940e+0) * r +
              2.05319162663775882187e+0) * r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                  1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                2.96560571828504891230e-1) * r + 1.78482653991729133580e+0) * r +
              5.46378491116411436990e+0) * r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                  1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
              5.99832206555887937690e-1) * r + 1.0);
  }
  return (q < 0.0) ? -value : value;
}

/// Inverse Mills ratio f(a) = phi(a)/Phi(-a) = E[Z | Z > a] for Z ~ N(0,1).
///
/// The naive ratio breaks down once Phi(-a) underflows (a ~ 37.5); routing the
/// upper branch through erfcx keeps the result O(a) for arbitrarily large a.
inline double inv_mills_f(double a) {
  if (!std::isfinite(a)) throw DomainError("inv_mills_f: input must be finite");
  if (a <= 5.0) return norm_pdf(a) / (0.5 * std::erfc(a / kSqrt2));
  // phi(a)/Phi(-a) = sqrt(2/pi) / erfcx(a/sqrt(2)).
  return (2.0 * kInvSqrt2Pi) / erfcx(a / kSqrt2);
}

/// Truncated second moment g(a) = 1 + a*phi(a)/Phi(-a) = E[Z^2 | Z > a].
inline double trunc_second_moment_g(double a) {
  if (!std::isfinite(a)) throw DomainError("trunc_second_moment_g: input must be finite");
  return 1.0 + a * inv_mills_f(a);
}

// ---------------------------------------------------------------------------
// Adaptive quadrature
// ---------------------------------------------------------------------------

struct QuadratureSpec {
  double abs_tol = 1e-10;
  double rel_tol = 1e-8;
  int max_subdivisions = 200;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0) || max_subdivisions < 1)
      throw DomainError("QuadratureSpec: tolerances must be positive, max_subdivisions >= 1");
  }
};

namespace detail {

// 15-point Kronrod nodes/weights with the embedded 7-point Gauss rule
// (QUADPACK dqk15 constants).
inline constexpr double kKronrodX[8] = {
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144838258730, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
inline constexpr double kKronrodW[8] = {
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
inline constexpr double kGaussW[4] = {
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327};

template <typename F>
std::pair<double, double> gauss_kronrod_15(F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);
  double fv[15];
  for (int j = 0; j < 7; ++j) {
    fv[j] = f(center - half * kKronrodX[j]);
    fv[14 - j] = f(center + half * kKronrodX[j]);
  }
  fv[7] = f(center);
  double kronrod = 0.0;
  for (int j = 0; j < 7; ++j) kronrod += kKronrodW[j] * (fv[j] + fv[14 - j]);
  kronrod += kKronrodW[7] * fv[7];
  double gauss = kGaussW[3] * fv[7];
  for (int j = 0; j < 3; ++j) gauss += kGaussW[j] * (fv[2 * j + 1] + fv[13 - 2 * j]);
  kronrod *= half;
  gauss *= half;
  double err = std::abs(kronrod - gauss);
  // QUADPACK-style error sharpening.
  if (err > 0.0) err = std::pow(200.0 * err, 1.5) * 0.01;
  if (!(std::isfinite(err)) || err > std::abs(kronrod - gauss)) err = std::abs(kronrod - gauss);
  return {kronrod, std::max(err, std::abs(kronrod) * 1e-16)};
}

struct QuadSegment {
  double a, b, result, error;
  bool operator<(const QuadSegment& other) const { return error < other.error; }
};

// Adaptive bisection on a finite interval.
template <typename F>
double adaptive_finite(F& f, double a, double b, const QuadratureSpec& spec) {
  std::priority_queue<QuadSegment> segments;
  auto [r0, e0] = gauss_kronrod_15(f, a, b);
  segments.push({a, b, r0, e0});
  double total = r0;
  double total_err = e0;
  for (int sub = 0; sub < spec.max_subdivisions; ++sub) {
    if (total_err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) return total;
    QuadSegment worst = segments.top();
    segments.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    if (mid <= worst.a || mid >= worst.b) {  // interval no longer splittable
      segments.push(worst);
      break;
    }
    auto [rl, el] = gauss_kronrod_15(f, worst.a, mid);
    auto [rr, er] = gauss_kronrod_15(f, mid, worst.b);
    total += rl + rr - worst.result;
    total_err += el + er - worst.error;
    segments.push({worst.a, mid, rl, el});
    segments.push({mid, worst.b, rr, er});
  }
  if (total_err <= std::max(spec.abs_tol, spec.rel_tol * std::abs(total))) return total;
  throw QuadratureError("integrate: subdivision budget exhausted before reaching tolerance",
                        total, total_err);
}

// Integral of f over (a, infinity).  The range is covered by geometrically
// growing finite panels before the mapped remainder: the bare substitution
// x = a + t/(1-t) squeezes mass at distance d from the bound into an
// O(1/d^2) window of the unit interval, which a 15-point rule can skip
// entirely once subdivision has moved past it, silently returning zero.
// Panels keep node spacing proportional to distance, so localized mass
// within roughly a hundred length units of the bound is always sampled.
template <typename F>
double upper_half_line(F& f, double a, const QuadratureSpec& spec) {
  double total = 0.0;
  double left = a;
  for (const double width : {1.0, 3.0, 9.0, 27.0, 81.0}) {
    total += adaptive_finite(f, left, left + width, spec);
    left += width;
  }
  auto tail = [&f, left](double t) {
    const double om = 1.0 - t;
    return f(left + t / om) / (om * om);
  };
  total += adaptive_finite(tail, 0.0, 1.0, spec);
  return total;
}

}  // namespace detail

/// Adaptive Gauss-Kronrod integration of f over (lower, upper).  Either bound
/// may be infinite; an infinite range is integrated as finite panels near the
/// finite bound (near the origin when both bounds are infinite) plus a mapped
/// remainder x = a + t/(1-t), so localized mass within ~1e2 of that anchor is
/// resolved reliably and smooth tails beyond it are handled by the map.
template <typename F>
double integrate(F&& f, double lower, double upper, const QuadratureSpec& spec = {}) {
  spec.validate();
  if (std::isnan(lower) || std::isnan(upper) || lower > upper)
    throw DomainError("integrate: invalid bounds");
  if (lower == upper) return 0.0;
  const bool lo_inf = std::isinf(lower);
  const bool hi_inf = std::isinf(upper);
  if (!lo_inf && !hi_inf) {
    auto g = [&f](double x) { return f(x); };
    return detail::adaptive_finite(g, lower, upper, spec);
  }
  if (lo_inf && hi_inf) {
    auto pos = [&f](double x) { return f(x); };
    auto neg = [&f](double x) { return f(-x); };
    return detail::upper_half_line(pos, 0.0, spec) + detail::upper_half_line(neg, 0.0, spec);
  }
  if (!lo_inf && hi_inf) {
    auto g = [&f](double x) { return f(x); };
    return detail::upper_half_line(g, lower, spec);
  }
  // (-inf, upper]: reflect onto (0, infinity)
  auto g = [&f, upper](double u) { return f(upper - u); };
  return detail::upper_half_line(g, 0.0, spec);
}

// ---------------------------------------------------------------------------
// Weighted least squares
// ---------------------------------------------------------------------------

struct WlsProblem {
  Eigen::MatrixXd design;   // n x p
  Eigen::VectorXd response; // n
  Eigen::VectorXd weights;  // n, strictly positive
};

namespace detail {

// Shared rank policy: pivoted QR, columns whose |R_kk| falls below
// 1e-10 * |R_00| are reported as linearly dependent.
inline void check_rank(const Eigen::ColPivHouseholderQR<Eigen::MatrixXd>& qr, int ncols,
                       const std::vector<std::string>* names, const char* what) {
  const Eigen::VectorXd diag = qr.matrixQR().diagonal().head(ncols).cwiseAbs();
  const double dmax = diag.size() > 0 ? diag(0) : 0.0;
  int rank = 0;
  while (rank < ncols && diag(rank) > 1e-10 * dmax && diag(rank) > 0.0) ++rank;
  if (rank == ncols) return;
  std::vector<std::string> offending;
  std::string msg = std::string(what) + ": design is rank deficient; dependent columns:";
  const auto& perm = qr.colsPermutation().indices();
  for (int k = rank; k < ncols; ++k) {
    const int col = perm(k);
    std::string label = (names && col < static_cast<int>(names->size()))
                            ? (*names)[col]
                            : ("column " + std::to_string(col));
    offending.push_back(label);
    msg += " " + label;
  }
  throw SingularError(msg, offending);
}

}  // namespace detail

/// Minimizer of sum_i w_i (r_i - x_i'b)^2, computed by Householder QR of the
/// sqrt(w)-scaled design rather than by forming the normal equations.
inline Eigen::VectorXd solve_wls(const WlsProblem& problem,
                                 const std::vector<std::string>* column_names = nullptr) {
  const Eigen::Index n = problem.design.rows();
  const Eigen::Index p = problem.design.cols();
  if (n < p || p < 1) throw DomainError("solve_wls: need n >= p >= 1");
  if (problem.response.size() != n || problem.weights.size() != n)
    throw DomainError("solve_wls: response/weights length mismatch");
  for (Eigen::Index i = 0; i < n; ++i) {
    const double w = problem.weights(i);
    if (!(w > 0.0) || !std::isfinite(w))
      throw DomainError("solve_wls: weights must be strictly positive and finite");
  }
  const Eigen::ArrayXd sw = problem.weights.array().sqrt();
  Eigen::MatrixXd scaled = sw.matrix().asDiagonal() * problem.design;
  Eigen::VectorXd rhs = (problem.response.array() * sw).matrix();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  detail::check_rank(qr, static_cast<int>(p), column_names, "solve_wls");
  return qr.solve(rhs);
}

// ---------------------------------------------------------------------------
// Gamma GLM with log link
// ---------------------------------------------------------------------------

struct GammaGlmResult {
  Eigen::VectorXd gamma;
  bool converged = false;
  int iterations = 0;
  double grad_norm = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double gamma_loglink_objective(const Eigen::VectorXd& u, const Eigen::MatrixXd& z,
                                      const Eigen::VectorXd& gamma) {
  const Eigen::ArrayXd eta = (z * gamma).array();
  return -0.5 * (u.array() * (-eta).exp() + eta).sum();
}

}  // namespace detail

/// Maximizer of -1/2 sum_i [ u_i exp(-z_i'g) + z_i'g ], the Gamma log-link
/// likelihood profile of a log-variance model.
///
/// Fisher scoring: with eta = Z g the expected information is Z'Z / 2 and the
/// score is Z'(u .* exp(-eta) - 1) / 2, so each step solves the unit-weight
/// least-squares problem with working response eta + u .* exp(-eta) - 1.
/// Steps are halved whenever they would decrease the (concave) objective.
inline GammaGlmResult fit_gamma_loglink(const Eigen::VectorXd& u, const Eigen::MatrixXd& z,
                                        const Eigen::VectorXd& init, double tol = 1e-10,
                                        int max_iter = 50) {
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  if (n < q || q < 1) throw DomainError("fit_gamma_loglink: need n >= q >= 1");
  if (u.size() != n || init.size() != q)
    throw DomainError("fit_gamma_loglink: dimension mismatch");
  if (!(tol > 0.0) || max_iter < 1)
    throw DomainError("fit_gamma_loglink: tol must be positive, max_iter >= 1");
  Eigen::Index positive = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!(u(i) >= 0.0) || !std::isfinite(u(i)))
      throw DomainError("fit_gamma_loglink: responses must be finite and nonnegative");
    if (u(i) > 0.0) ++positive;
  }
  if (positive == 0)
    throw EstimationError("fit_gamma_loglink: all responses are zero; likelihood is unbounded");
  if (positive < q)
    throw EstimationError("fit_gamma_loglink: fewer than q strictly positive responses");

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(z);
  detail::check_rank(qr, static_cast<int>(q), nullptr, "fit_gamma_loglink");

  GammaGlmResult out;
  out.gamma = init;
  double objective = detail::gamma_loglink_objective(u, z, out.gamma);
  // Floating-point slack for the monotonicity guard on a length-n sum.
  const double eps = std::numeric_limits<double>::epsilon();
  for (int iter = 0; iter <= max_iter; ++iter) {
    const Eigen::ArrayXd eta = (z * out.gamma).array();
    const Eigen::ArrayXd scaled = u.array() * (-eta).exp();
    const Eigen::VectorXd score = 0.5 * (z.transpose() * (scaled - 1.0).matrix());
    out.grad_norm = score.lpNorm<Eigen::Infinity>();
    out.iterations = iter;
    if (out.grad_norm <= tol) {
      out.converged = true;
      return out;
    }
    if (iter == max_iter) break;
    const Eigen::VectorXd step = qr.solve((scaled - 1.0).matrix());
    const double slack = 4.0 * eps * (static_cast<double>(n) + std::abs(objective));
    double scale = 1.0;
    bool moved = false;
    for (int half = 0; half < 60; ++half, scale *= 0.5) {
      const Eigen::VectorXd candidate = out.gamma + scale * step;
      const double cand_obj = detail::gamma_loglink_objective(u, z, candidate);
      if (std::isfinite(cand_obj) && cand_obj >= objective - slack) {
        out.gamma = candidate;
        objective = std::max(objective, cand_obj);
        moved = true;
        break;
      }
    }
    if (!moved) break;  // step direction numerically exhausted
  }
  return out;
}

}  // namespace haft

#endif  // HAFT_NUMKERNEL_HPP
