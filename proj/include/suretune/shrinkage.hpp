#pragma once

// Shrinkage families theta_s(Y) = Y/(1+s) and P_X Y/(1+s), their closed-form
// SURE minimizers, unbiased excess-df estimates, positive-part James-Stein
// estimators and the oracle risk bounds.

#include <stdexcept>
#include <string>

#include "core.hpp"
#include "linalg.hpp"
#include "monte_carlo.hpp"

namespace suretune {

/**
 * Minimizer over x in [0, inf] of g(x) = a x^2/(1+x)^2 + 2b/(1+x), a, b > 0.
 * Returns b/(a-b) when a > b and +inf otherwise; at a == b the critical point
 * diverges and g decreases towards its infimum a as x -> inf.
 */
inline Tuning minimize_quadratic_sure(double a, double b) {
  if (!(a > 0.0) || !(b > 0.0) || !std::isfinite(a) || !std::isfinite(b)) {
    throw std::domain_error("minimize_quadratic_sure: need finite a > 0 and b > 0");
  }
  if (a > b) return Tuning::value(b / (a - b));
  return Tuning::infinity();
}

/// g(x) from minimize_quadratic_sure, with g(inf) = a.
inline double quadratic_sure(double a, double b, const Tuning& x) {
  if (x.is_infinite()) return a;
  const double s = x.scalar();
  const double f = s / (1.0 + s);
  return a * f * f + 2.0 * b / (1.0 + s);
}

/// 1/(1+s), with 0 at s = inf.
inline double shrink_factor(const Tuning& s) {
  if (s.is_infinite()) return 0.0;
  return 1.0 / (1.0 + s.scalar());
}

namespace detail {
inline void require_scalar_tuning(const TuningDomain& dom, const Tuning& s, const char* where) {
  if (!dom.contains(s)) {
    throw std::domain_error(std::string(where) + ": tuning value " + s.to_string() +
                            " outside [0, inf]");
  }
}

inline TunedFit shrink_fit(const Tuning& s_hat, const Vec& target, double rank, double sigma,
                           const Vec& y) {
  TunedFit fit;
  fit.s_hat = s_hat;
  const double f = shrink_factor(s_hat);
  fit.theta_hat = f * target;
  fit.naive_df_at_shat = rank * f;
  fit.sure_min = (y - fit.theta_hat).squaredNorm() + 2.0 * sigma * sigma * fit.naive_df_at_shat;
  return fit;
}
}  // namespace detail

/// Normal-means shrinkage family theta_s(Y) = Y/(1+s), s in [0, inf].
class ShrinkMeansFamily {
 public:
  ShrinkMeansFamily(Index n, double sigma)
      : n_(n), noise_(NoiseSpec::homoskedastic(sigma)), domain_(TuningDomain::interval(0.0, kInf)) {
    if (n < 1) throw std::invalid_argument("ShrinkMeansFamily: n must be >= 1");
  }

  Index dim() const { return n_; }
  double sigma() const { return noise_.sigma(); }
  const NoiseSpec& noise() const { return noise_; }
  const TuningDomain& domain() const { return domain_; }

  Vec estimate(const Tuning& s, const Vec& y) const {
    detail::require_scalar_tuning(domain_, s, "ShrinkMeansFamily::estimate");
    require_dim(y, n_, "ShrinkMeansFamily::estimate");
    return shrink_factor(s) * y;
  }
  double naive_df(const Tuning& s, const Vec& y) const {
    detail::require_scalar_tuning(domain_, s, "ShrinkMeansFamily::naive_df");
    require_dim(y, n_, "ShrinkMeansFamily::naive_df");
    return static_cast<double>(n_) * shrink_factor(s);
  }

  /// s_hat = n sigma^2 / (||Y||^2 - n sigma^2) when ||Y||^2 > n sigma^2, else inf.
  TunedFit tune(const Vec& y) const {
    require_dim(y, n_, "ShrinkMeansFamily::tune");
    const double a = y.squaredNorm();
    const double b = static_cast<double>(n_) * sigma() * sigma();
    const Tuning s_hat = a > 0.0 ? minimize_quadratic_sure(a, b) : Tuning::infinity();
    return detail::shrink_fit(s_hat, y, static_cast<double>(n_), sigma(), y);
  }

  /// Exact risk of the fixed-s member.
  double exact_risk(const Tuning& s, const GaussianModel& model) const {
    const double f = shrink_factor(s);
    const double norm2 = model.theta0().squaredNorm();
    const double s2 = model.noise().sigma() * model.noise().sigma();
    return (1.0 - f) * (1.0 - f) * norm2 + static_cast<double>(n_) * s2 * f * f;
  }

  /// s0 = n sigma^2/||theta0||^2, risk n sigma^2 ||theta0||^2 / (n sigma^2 + ||theta0||^2).
  OracleResult oracle(const GaussianModel& model) const {
    require_dim(model.theta0(), n_, "ShrinkMeansFamily::oracle");
    const double s2 = model.noise().sigma() * model.noise().sigma();
    const double ns2 = static_cast<double>(n_) * s2;
    const double norm2 = model.theta0().squaredNorm();
    OracleResult out;
    if (norm2 == 0.0) {
      out.s0 = Tuning::infinity();
      out.oracle_risk = 0.0;
    } else {
      out.s0 = Tuning::value(ns2 / norm2);
      out.oracle_risk = ns2 * norm2 / (ns2 + norm2);
    }
    out.oracle_err = out.oracle_risk + ns2;
    return out;
  }

 private:
  Index n_;
  NoiseSpec noise_;
  TuningDomain domain_;
};

/// Regression shrinkage family theta_s(Y) = P_X Y/(1+s), with r = rank(X).
class ShrinkRegressionFamily {
 public:
  ShrinkRegressionFamily(const Mat& x, double sigma)
      : x_(x),
        proj_(x),
        noise_(NoiseSpec::homoskedastic(sigma)),
        domain_(TuningDomain::interval(0.0, kInf)) {}

  Index dim() const { return x_.rows(); }
  Index rank() const { return proj_.rank(); }
  double sigma() const { return noise_.sigma(); }
  const Mat& design() const { return x_; }
  const ColumnProjector& projector() const { return proj_; }
  const NoiseSpec& noise() const { return noise_; }
  const TuningDomain& domain() const { return domain_; }

  Vec estimate(const Tuning& s, const Vec& y) const {
    detail::require_scalar_tuning(domain_, s, "ShrinkRegressionFamily::estimate");
    require_dim(y, dim(), "ShrinkRegressionFamily::estimate");
    return shrink_factor(s) * proj_.apply(y);
  }
  double naive_df(const Tuning& s, const Vec& y) const {
    detail::require_scalar_tuning(domain_, s, "ShrinkRegressionFamily::naive_df");
    require_dim(y, dim(), "ShrinkRegressionFamily::naive_df");
    return static_cast<double>(rank()) * shrink_factor(s);
  }

  TunedFit tune(const Vec& y) const {
    require_dim(y, dim(), "ShrinkRegressionFamily::tune");
    const Vec py = proj_.apply(y);
    const double a = py.squaredNorm();
    const double b = static_cast<double>(rank()) * sigma() * sigma();
    Tuning s_hat = Tuning::infinity();
    if (rank() == 0) {
      // Every member is the zero vector; ties go to the smallest s.
      s_hat = Tuning::value(0.0);
    } else if (a > 0.0) {
      s_hat = minimize_quadratic_sure(a, b);
    }
    return detail::shrink_fit(s_hat, py, static_cast<double>(rank()), sigma(), y);
  }

  double exact_risk(const Tuning& s, const GaussianModel& model) const {
    const double f = shrink_factor(s);
    const Vec& th = model.theta0();
    const double s2 = model.noise().sigma() * model.noise().sigma();
    return (th - f * proj_.apply(th)).squaredNorm() + static_cast<double>(rank()) * s2 * f * f;
  }

  /// s0 = r sigma^2 / ||P_X theta0||^2 with the matching closed-form risk.
  OracleResult oracle(const GaussianModel& model) const {
    require_dim(model.theta0(), dim(), "ShrinkRegressionFamily::oracle");
    const double s2 = model.noise().sigma() * model.noise().sigma();
    const double rs2 = static_cast<double>(rank()) * s2;
    const double norm2 = model.theta0().squaredNorm();
    const double pnorm2 = proj_.squared_norm_of_projection(model.theta0());
    OracleResult out;
    if (pnorm2 == 0.0) {
      out.s0 = Tuning::infinity();
      out.oracle_risk = norm2;
    } else {
      out.s0 = Tuning::value(rs2 / pnorm2);
      out.oracle_risk = (rs2 * norm2 + pnorm2 * (norm2 - pnorm2)) / (rs2 + pnorm2);
    }
    out.oracle_err = out.oracle_risk + static_cast<double>(dim()) * s2;
    return out;
  }

 private:
  Mat x_;
  ColumnProjector proj_;
  NoiseSpec noise_;
  TuningDomain domain_;
};

inline TunedFit tune_shrink_means(const Vec& y, double sigma) {
  return ShrinkMeansFamily(y.size(), sigma).tune(y);
}

inline TunedFit tune_shrink_regression(const Mat& x, const Vec& y, double sigma) {
  return ShrinkRegressionFamily(x, sigma).tune(y);
}

/// (1 - n sigma^2/||Y||^2)_+ Y: the SURE-tuned estimate written without s_hat.
inline Vec shrink_means_positive_part(const Vec& y, double sigma) {
  const double norm2 = y.squaredNorm();
  if (norm2 == 0.0) return Vec::Zero(y.size());
  const double c = 1.0 - static_cast<double>(y.size()) * sigma * sigma / norm2;
  return std::max(c, 0.0) * y;
}

/**
 * Unbiased excess-df estimate of a tuned shrinkage fit: 2 s_hat/(1+s_hat),
 * and 0 when s_hat = inf. Always in [0, 2].
 */
inline double edf_unbiased_shrink(const TunedFit& fit) {
  if (fit.s_hat.is_label()) {
    throw std::invalid_argument("edf_unbiased_shrink: fit is not from a shrinkage family");
  }
  if (fit.s_hat.is_infinite()) return 0.0;
  const double s = fit.s_hat.scalar();
  return 2.0 * s / (1.0 + s);
}

/// Positive-part James-Stein: (1 - (n-2) sigma^2/||Y||^2)_+ Y.
inline Vec james_stein_positive(const Vec& y, double sigma) {
  const double norm2 = y.squaredNorm();
  if (norm2 == 0.0) return Vec::Zero(y.size());
  const double c = 1.0 - (static_cast<double>(y.size()) - 2.0) * sigma * sigma / norm2;
  return std::max(c, 0.0) * y;
}

/// Regression form: (1 - (r-2) sigma^2/||P_X Y||^2)_+ P_X Y.
inline Vec james_stein_positive(const ColumnProjector& proj, const Vec& y, double sigma) {
  const Vec py = proj.apply(y);
  const double norm2 = py.squaredNorm();
  if (norm2 == 0.0) return Vec::Zero(y.size());
  const double c = 1.0 - (static_cast<double>(proj.rank()) - 2.0) * sigma * sigma / norm2;
  return std::max(c, 0.0) * py;
}

/**
 * Unbiased estimate of Risk(theta_{s_hat}) for SURE-tuned means shrinkage:
 * n sigma^2 - (n-4) sigma^2 * n sigma^2/||Y||^2 when ||Y||^2 >= n sigma^2,
 * and ||Y||^2 - n sigma^2 otherwise.
 */
inline double unbiased_risk_sure_tuned_shrink(const Vec& y, double sigma) {
  const double n = static_cast<double>(y.size());
  const double s2 = sigma * sigma;
  const double norm2 = y.squaredNorm();
  if (norm2 >= n * s2 && norm2 > 0.0) return n * s2 - (n - 4.0) * s2 * n * s2 / norm2;
  return norm2 - n * s2;
}

struct ShrinkRiskBounds {
  double oracle_risk = 0.0;
  double sure_tuned_bound = 0.0;  // oracle + 4 sigma^2
  double js_bound = 0.0;          // oracle + 2 sigma^2
};

inline ShrinkRiskBounds risk_bounds_shrink(const GaussianModel& model) {
  if (!model.noise().is_homoskedastic()) {
    throw std::invalid_argument("risk_bounds_shrink: model must be homoskedastic");
  }
  const double s2 = model.noise().sigma() * model.noise().sigma();
  const double oracle =
      ShrinkMeansFamily(model.dim(), model.noise().sigma()).oracle(model).oracle_risk;
  return {oracle, oracle + 4.0 * s2, oracle + 2.0 * s2};
}

/// Regression version, with r = rank(X) and P_X theta0.
inline ShrinkRiskBounds risk_bounds_shrink(const Mat& x, const GaussianModel& model) {
  if (!model.noise().is_homoskedastic()) {
    throw std::invalid_argument("risk_bounds_shrink: model must be homoskedastic");
  }
  const double s2 = model.noise().sigma() * model.noise().sigma();
  const double oracle = ShrinkRegressionFamily(x, model.noise().sigma()).oracle(model).oracle_risk;
  return {oracle, oracle + 4.0 * s2, oracle + 2.0 * s2};
}

}  // namespace suretune
