#pragma once

// Stein divergences, the implicit-differentiation excess-df estimate for
// smoothly tuned families, heteroskedastic shrinkage Y_i/(1 + sigma_i^2 s)
// and ridge regression rewritten as heteroskedastic shrinkage.

#include <algorithm>
#include <functional>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include <boost/math/tools/minima.hpp>
#include <boost/math/tools/roots.hpp>

#include "core.hpp"
#include "linalg.hpp"
#include "monte_carlo.hpp"
#include "shrinkage.hpp"

namespace suretune {

/// Assumption 3 fails at this Y: d^2G/ds^2 <= 0 at s_hat.
class curvature_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// s_hat is not an interior stationary point of G(Y, .).
class stationarity_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// sum_i d rule_i / d y_i by central differences with step 1e-5 sd_i.
template <class Rule>
double numeric_divergence(const Rule& rule, const Vec& y, const NoiseSpec& noise) {
  double div = 0.0;
  Vec yp = y, ym = y;
  for (Index i = 0; i < y.size(); ++i) {
    const double h = 1e-5 * noise.sd(i);
    yp[i] = y[i] + h;
    ym[i] = y[i] - h;
    const Vec fp = rule(yp);
    const Vec fm = rule(ym);
    div += (fp[i] - fm[i]) / (2.0 * h);
    yp[i] = ym[i] = y[i];
  }
  return div;
}

template <class Rule>
double numeric_divergence(const Rule& rule, const Vec& y, double sigma) {
  return numeric_divergence(rule, y, NoiseSpec::homoskedastic(sigma));
}

/**
 * The parent map Theta(Y, s) and SURE surface G(Y, s) of a continuously
 * tuned family. Derivative hooks left empty fall back to central
 * differences; first derivatives use step 1e-5 (1 + |v|), second derivatives
 * 1e-4 (1 + |v|) to keep rounding error in G below the tolerance.
 */
struct SmoothFamilyHooks {
  std::function<Vec(const Vec&, double)> theta;
  std::function<double(const Vec&, double)> G;
  std::function<Vec(const Vec&, double)> dtheta_ds;
  std::function<double(const Vec&, double)> dG_ds;
  std::function<double(const Vec&, double)> d2G_ds2;
  std::function<Vec(const Vec&, double)> d2G_dYds;  // component i is d^2 G / dY_i ds
};

namespace detail {
inline double step1(double v) { return 1e-5 * (1.0 + std::abs(v)); }
inline double step2(double v) { return 1e-4 * (1.0 + std::abs(v)); }

/// Central difference in s, keeping s - h >= 0 by switching to a one-sided stencil.
template <class F, class R = std::invoke_result_t<const F&, double>>
R diff_s(const F& f, double s, double h) {
  if (s - h < 0.0) return R((-3.0 * f(s) + 4.0 * f(s + h) - f(s + 2.0 * h)) / (2.0 * h));
  return R((f(s + h) - f(s - h)) / (2.0 * h));
}
}  // namespace detail

inline Vec hooks_dtheta_ds(const SmoothFamilyHooks& hk, const Vec& y, double s) {
  if (hk.dtheta_ds) return hk.dtheta_ds(y, s);
  return detail::diff_s([&](double t) { return Vec(hk.theta(y, t)); }, s, detail::step1(s));
}

inline double hooks_dG_ds(const SmoothFamilyHooks& hk, const Vec& y, double s) {
  if (hk.dG_ds) return hk.dG_ds(y, s);
  return detail::diff_s([&](double t) { return hk.G(y, t); }, s, detail::step1(s));
}

inline double hooks_d2G_ds2(const SmoothFamilyHooks& hk, const Vec& y, double s) {
  if (hk.d2G_ds2) return hk.d2G_ds2(y, s);
  const double h = detail::step2(s);
  if (hk.dG_ds) return detail::diff_s([&](double t) { return hk.dG_ds(y, t); }, s, h);
  if (s - h < 0.0) return (hk.G(y, s) - 2.0 * hk.G(y, s + h) + hk.G(y, s + 2.0 * h)) / (h * h);
  return (hk.G(y, s + h) - 2.0 * hk.G(y, s) + hk.G(y, s - h)) / (h * h);
}

inline Vec hooks_d2G_dYds(const SmoothFamilyHooks& hk, const Vec& y, double s) {
  if (hk.d2G_dYds) return hk.d2G_dYds(y, s);
  Vec out(y.size());
  Vec yp = y, ym = y;
  for (Index i = 0; i < y.size(); ++i) {
    const double h = detail::step2(y[i]);
    yp[i] = y[i] + h;
    ym[i] = y[i] - h;
    out[i] = (hooks_dG_ds(hk, yp, s) - hooks_dG_ds(hk, ym, s)) / (2.0 * h);
    yp[i] = ym[i] = y[i];
  }
  return out;
}

/**
 * Smooth part of the excess df at one Y:
 *   -(d^2G/ds^2)^{-1} sum_i (dTheta_i/ds)(d^2G/dY_i ds), evaluated at (Y, s_hat).
 * Throws stationarity_error when |dG/ds| (1 + s) exceeds stationarity_tol (1 + |G|),
 * and curvature_error when d^2G/ds^2 <= 0.
 */
inline double edf_implicit_diff(const SmoothFamilyHooks& hk, const Vec& y, double s_hat,
                                double stationarity_tol = 1e-6) {
  if (!hk.theta || !hk.G) throw std::invalid_argument("edf_implicit_diff: theta and G hooks are required");
  if (!(s_hat >= 0.0) || !std::isfinite(s_hat)) {
    throw stationarity_error("edf_implicit_diff: s_hat must be finite and nonnegative");
  }
  const double g = hk.G(y, s_hat);
  const double slope = hooks_dG_ds(hk, y, s_hat);
  if (std::abs(slope) * (1.0 + s_hat) > stationarity_tol * (1.0 + std::abs(g))) {
    throw stationarity_error("edf_implicit_diff: dG/ds = " + std::to_string(slope) + " at s_hat");
  }
  const double curv = hooks_d2G_ds2(hk, y, s_hat);
  if (!(curv > 0.0)) {
    throw curvature_error("edf_implicit_diff: d2G/ds2 = " + std::to_string(curv) + " at s_hat");
  }
  return -hooks_dtheta_ds(hk, y, s_hat).dot(hooks_d2G_dYds(hk, y, s_hat)) / curv;
}

/// Closed-form hooks for Y/(1+s) with G = ||Y||^2 s^2/(1+s)^2 + 2 n sigma^2/(1+s).
inline SmoothFamilyHooks means_shrink_hooks(double sigma) {
  const double s2 = sigma * sigma;
  SmoothFamilyHooks hk;
  hk.theta = [](const Vec& y, double s) { return Vec(y / (1.0 + s)); };
  hk.dtheta_ds = [](const Vec& y, double s) { return Vec(-y / ((1.0 + s) * (1.0 + s))); };
  hk.G = [s2](const Vec& y, double s) {
    const double f = s / (1.0 + s);
    return y.squaredNorm() * f * f + 2.0 * static_cast<double>(y.size()) * s2 / (1.0 + s);
  };
  hk.dG_ds = [s2](const Vec& y, double s) {
    const double q = 1.0 + s;
    return 2.0 * y.squaredNorm() * s / (q * q * q) - 2.0 * static_cast<double>(y.size()) * s2 / (q * q);
  };
  hk.d2G_ds2 = [s2](const Vec& y, double s) {
    const double q = 1.0 + s;
    return y.squaredNorm() * (2.0 - 4.0 * s) / (q * q * q * q) +
           4.0 * static_cast<double>(y.size()) * s2 / (q * q * q);
  };
  hk.d2G_dYds = [](const Vec& y, double s) {
    const double q = 1.0 + s;
    return Vec(4.0 * s / (q * q * q) * y);
  };
  return hk;
}

/// Hooks for P_X Y/(1+s): the means hooks applied to P_X Y with n replaced by r.
inline SmoothFamilyHooks regression_shrink_hooks(const ColumnProjector& proj, double sigma) {
  const double s2 = sigma * sigma;
  const auto r = static_cast<double>(proj.rank());
  SmoothFamilyHooks hk;
  hk.theta = [proj](const Vec& y, double s) { return Vec(proj.apply(y) / (1.0 + s)); };
  hk.dtheta_ds = [proj](const Vec& y, double s) { return Vec(-proj.apply(y) / ((1.0 + s) * (1.0 + s))); };
  hk.G = [proj, s2, r](const Vec& y, double s) {
    const Vec py = proj.apply(y);
    const double f = s / (1.0 + s);
    return (y - py).squaredNorm() + py.squaredNorm() * f * f + 2.0 * r * s2 / (1.0 + s);
  };
  hk.dG_ds = [proj, s2, r](const Vec& y, double s) {
    const double q = 1.0 + s;
    return 2.0 * proj.squared_norm_of_projection(y) * s / (q * q * q) - 2.0 * r * s2 / (q * q);
  };
  hk.d2G_ds2 = [proj, s2, r](const Vec& y, double s) {
    const double q = 1.0 + s;
    return proj.squared_norm_of_projection(y) * (2.0 - 4.0 * s) / (q * q * q * q) + 4.0 * r * s2 / (q * q * q);
  };
  hk.d2G_dYds = [proj](const Vec& y, double s) {
    const double q = 1.0 + s;
    return Vec(4.0 * s / (q * q * q) * proj.apply(y));
  };
  return hk;
}

/**
 * Variance-scaled SURE of heteroskedastic shrinkage:
 *   G(s) = sum Y_i^2 u_i s^2/(1+u_i s)^2 + 2/(1+u_i s),  u_i = sigma_i^2.
 */
inline double hetero_sure(const Vec& y, const Vec& sigmas, double s) {
  if (std::isinf(s)) return (y.array() / sigmas.array()).square().sum();
  double g = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double u = sigmas[i] * sigmas[i];
    const double q = 1.0 + u * s;
    g += y[i] * y[i] * u * s * s / (q * q) + 2.0 / q;
  }
  return g;
}

inline double hetero_sure_ds(const Vec& y, const Vec& sigmas, double s) {
  double d = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double u = sigmas[i] * sigmas[i];
    const double q = 1.0 + u * s;
    d += 2.0 * y[i] * y[i] * u * s / (q * q * q) - 2.0 * u / (q * q);
  }
  return d;
}

inline SmoothFamilyHooks hetero_shrink_hooks(const Vec& sigmas) {
  const Vec u = sigmas.array().square();
  SmoothFamilyHooks hk;
  hk.theta = [u](const Vec& y, double s) { return Vec(y.array() / (1.0 + u.array() * s)); };
  hk.dtheta_ds = [u](const Vec& y, double s) {
    return Vec(-y.array() * u.array() / (1.0 + u.array() * s).square());
  };
  hk.G = [sigmas](const Vec& y, double s) { return hetero_sure(y, sigmas, s); };
  hk.dG_ds = [sigmas](const Vec& y, double s) { return hetero_sure_ds(y, sigmas, s); };
  hk.d2G_ds2 = [u](const Vec& y, double s) {
    const auto q = (1.0 + u.array() * s);
    return (2.0 * y.array().square() * u.array() * (1.0 - 2.0 * u.array() * s) / q.pow(4) +
            4.0 * u.array().square() / q.cube())
        .sum();
  };
  hk.d2G_dYds = [u](const Vec& y, double s) {
    return Vec(4.0 * y.array() * u.array() * s / (1.0 + u.array() * s).cube());
  };
  return hk;
}

/**
 * Ratio form of the heteroskedastic excess optimism at s_hat (variance-scaled
 * units, so it equals twice the excess df):
 *   sum 4 Y_i^2 u_i^2 s/(1+u_i s)^5
 *   / sum u_i/(1+u_i s)^2 [Y_i^2 - 4 Y_i^2 u_i s/(1+u_i s) + 3 Y_i^2 u_i^2 s^2/(1+u_i s)^2 + 2 u_i/(1+u_i s)].
 */
inline double exopt_hetero_shrink(const Vec& y, const Vec& sigmas, double s_hat) {
  if (y.size() != sigmas.size()) throw std::invalid_argument("exopt_hetero_shrink: length mismatch");
  if (!std::isfinite(s_hat) || s_hat < 0.0) {
    throw std::domain_error("exopt_hetero_shrink: s_hat must be finite and nonnegative");
  }
  double num = 0.0, den = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double u = sigmas[i] * sigmas[i];
    const double q = 1.0 + u * s_hat;
    const double y2 = y[i] * y[i];
    num += 4.0 * y2 * u * u * s_hat / std::pow(q, 5);
    den += u / (q * q) * (y2 - 4.0 * y2 * u * s_hat / q + 3.0 * y2 * u * u * s_hat * s_hat / (q * q) + 2.0 * u / q);
  }
  if (num == 0.0) return 0.0;
  if (!(den > 0.0)) throw curvature_error("exopt_hetero_shrink: nonpositive curvature denominator");
  return num / den;
}

namespace detail {
struct HeteroMinimum {
  double s = 0.0;  // +inf for the limit
  double g = 0.0;
};

/// Refines a local minimum of G inside [a, b] (b may be inf).
inline HeteroMinimum refine_hetero(const Vec& y, const Vec& sigmas, double a, double b) {
  auto G = [&](double s) { return hetero_sure(y, sigmas, s); };
  double s_star;
  if (std::isinf(b)) {
    // Tail bracket in w = 1/(1+s), w in [0, 1/(1+a)].
    auto Gw = [&](double w) { return w <= 0.0 ? G(kInf) : G(1.0 / w - 1.0); };
    const auto r = boost::math::tools::brent_find_minima(Gw, 0.0, 1.0 / (1.0 + a), 52);
    if (r.first <= 0.0) return {kInf, G(kInf)};
    s_star = 1.0 / r.first - 1.0;
  } else {
    auto Gx = [&](double x) { return G(std::expm1(x)); };
    const auto r = boost::math::tools::brent_find_minima(Gx, std::log1p(a), std::log1p(b), 52);
    s_star = std::expm1(r.first);
  }
  // Polish on the stationarity condition when the slope changes sign around s_star.
  auto dG = [&](double s) { return hetero_sure_ds(y, sigmas, s); };
  double lo = std::max(a, s_star * (1.0 - 1e-3)), hi = s_star * (1.0 + 1e-3) + 1e-300;
  if (!std::isinf(b)) hi = std::min(hi, b);
  if (dG(lo) < 0.0 && dG(hi) > 0.0) {
    const auto root = boost::math::tools::bisect(
        dG, lo, hi, [](double l, double h) { return std::abs(h - l) <= 1e-15 * std::max(1.0, std::abs(h)); });
    s_star = 0.5 * (root.first + root.second);
  }
  const double g = G(s_star);
  if (G(kInf) < g) return {kInf, G(kInf)};
  return {s_star, g};
}
}  // namespace detail

/**
 * Heteroskedastic shrinkage theta_s,i(Y) = Y_i/(1 + sigma_i^2 s), s in [0, inf].
 * SURE is the variance-scaled criterion, so optimism and df are in units of
 * the standardized coordinates Y_i/sigma_i.
 */
class HeteroShrinkFamily {
 public:
  explicit HeteroShrinkFamily(Vec sigmas)
      : noise_(NoiseSpec::heteroskedastic(std::move(sigmas))), domain_(TuningDomain::interval(0.0, kInf)) {}

  Index dim() const { return noise_.sigmas().size(); }
  const Vec& sigmas() const { return noise_.sigmas(); }
  const NoiseSpec& noise() const { return noise_; }
  const TuningDomain& domain() const { return domain_; }

  Vec estimate(const Tuning& s, const Vec& y) const {
    check(s, y, "HeteroShrinkFamily::estimate");
    if (s.is_infinite()) return Vec::Zero(dim());
    return y.array() / (1.0 + sigmas().array().square() * s.scalar());
  }
  double naive_df(const Tuning& s, const Vec& y) const {
    check(s, y, "HeteroShrinkFamily::naive_df");
    if (s.is_infinite()) return 0.0;
    return (1.0 / (1.0 + sigmas().array().square() * s.scalar())).sum();
  }

  /**
   * Multi-start minimization: G on 0, a 64-point log grid and inf; every
   * grid local minimum is refined (golden section in log(1+s), then
   * bisection on dG/ds). Lowest G wins, ties to the smaller s.
   */
  TunedFit tune(const Vec& y) const {
    require_dim(y, dim(), "HeteroShrinkFamily::tune");
    const Vec& sg = sigmas();
    const double umin = sg.array().square().minCoeff();
    const double umax = sg.array().square().maxCoeff();
    std::vector<double> pts;
    pts.push_back(0.0);
    const double lo = std::log(1e-4 / umax), hi = std::log(1e6 / umin);
    for (int k = 0; k < 64; ++k) pts.push_back(std::exp(lo + (hi - lo) * k / 63.0));
    pts.push_back(kInf);
    std::vector<double> g(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) g[k] = hetero_sure(y, sg, pts[k]);

    std::vector<detail::HeteroMinimum> mins;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const bool left_ok = k == 0 || g[k] <= g[k - 1];
      const bool right_ok = k + 1 == pts.size() || g[k] <= g[k + 1];
      if (!left_ok || !right_ok) continue;
      if (k + 1 == pts.size()) {
        mins.push_back(detail::refine_hetero(y, sg, pts[k - 1], kInf));
        continue;
      }
      const double a = k == 0 ? 0.0 : pts[k - 1];
      mins.push_back(detail::refine_hetero(y, sg, a, pts[k + 1]));
    }
    // Merge minima that converged to the same point.
    std::sort(mins.begin(), mins.end(), [](const auto& a, const auto& b) { return a.s < b.s; });
    std::vector<detail::HeteroMinimum> distinct;
    for (const auto& m : mins) {
      if (!distinct.empty()) {
        const auto& last = distinct.back();
        const bool same = (std::isinf(m.s) && std::isinf(last.s)) ||
                          std::abs(m.s - last.s) <= 1e-6 * std::max(1.0, std::abs(m.s));
        if (same) continue;
      }
      distinct.push_back(m);
    }
    detail::HeteroMinimum best = distinct.front();
    for (const auto& m : distinct) {
      if (m.g < best.g - 1e-12 * (1.0 + std::abs(best.g))) best = m;
    }
    TunedFit fit;
    fit.s_hat = std::isinf(best.s) ? Tuning::infinity() : Tuning::value(best.s);
    fit.theta_hat = estimate(fit.s_hat, y);
    fit.naive_df_at_shat = naive_df(fit.s_hat, y);
    fit.sure_min = sure_from_parts(noise_, y, fit.theta_hat, fit.naive_df_at_shat);
    fit.multimodal = distinct.size() > 1;
    return fit;
  }

 private:
  void check(const Tuning& s, const Vec& y, const char* where) const {
    if (!domain_.contains(s)) {
      throw std::domain_error(std::string(where) + ": tuning value " + s.to_string() + " outside [0, inf]");
    }
    require_dim(y, dim(), where);
  }

  NoiseSpec noise_;
  TuningDomain domain_;
};

inline TunedFit tune_hetero_shrink(const Vec& y, const Vec& sigmas) {
  return HeteroShrinkFamily(sigmas).tune(y);
}

/**
 * Ridge regression in the rotated coordinates W = D^{-1} U^T Y of the thin
 * SVD X = U D V^T (rank-r part). With noise sd sigma, W_i has sd sigma/d_i and
 * the ridge fit with penalty lambda is heteroskedastic shrinkage of W at
 * s = lambda/sigma^2.
 */
struct RidgeAsHetero {
  Vec w;
  HeteroShrinkFamily family;
  Mat u;      // n x r
  Vec d;      // r singular values, decreasing
  Mat v;      // p x r
  double sigma = 1.0;

  double s_for_lambda(double lambda) const { return lambda / (sigma * sigma); }
  Vec alpha(double lambda) const { return family.estimate(Tuning::value(s_for_lambda(lambda)), w); }
  /// X beta_hat = U D alpha_hat.
  Vec fitted(double lambda) const { return u * d.cwiseProduct(alpha(lambda)); }
  Vec coefficients(double lambda) const { return v * alpha(lambda); }
};

inline RidgeAsHetero ridge_as_hetero(const Mat& x, const Vec& y, double sigma = 1.0) {
  require_dim(y, x.rows(), "ridge_as_hetero");
  Eigen::BDCSVD<Mat> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vec& sv = svd.singularValues();
  const double cut = kRankTolerance * std::max(1.0, sv.size() ? sv[0] : 0.0);
  Index r = 0;
  while (r < sv.size() && sv[r] > cut) ++r;
  if (r == 0) throw std::domain_error("ridge_as_hetero: X has rank 0");
  Mat u = svd.matrixU().leftCols(r);
  Vec d = sv.head(r);
  Mat v = svd.matrixV().leftCols(r);
  Vec w = (u.transpose() * y).cwiseQuotient(d);
  Vec sig = Vec::Constant(r, sigma).cwiseQuotient(d);
  return RidgeAsHetero{std::move(w), HeteroShrinkFamily(std::move(sig)), std::move(u), std::move(d),
                       std::move(v), sigma};
}

}  // namespace suretune
