#pragma once

// Numeric evaluation of the excess-df bounds for subset regression: the
// chi-square max bound, Gaussian surface areas of balls, the gas stations
// rotation, the nested-chain bounds and the best-subset constant.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/non_central_chi_squared.hpp>
#include <boost/math/tools/minima.hpp>

#include "core.hpp"
#include "parallel.hpp"

namespace suretune {

struct ChiSqMaxBoundInput {
  std::vector<long> sizes;  // p_s >= 0, one per subset
  double delta = 0.5;       // in [0, 1)

  void validate() const {
    if (sizes.empty()) throw std::invalid_argument("ChiSqMaxBoundInput: no sizes");
    for (long p : sizes) {
      if (p < 0) throw std::invalid_argument("ChiSqMaxBoundInput: negative size");
    }
    if (!(delta >= 0.0 && delta < 1.0)) throw std::domain_error("ChiSqMaxBoundInput: delta must lie in [0, 1)");
  }
};

/**
 * (2/(1-delta)) log sum_s (delta e^{1-delta})^{-p_s/2}, summed in log space.
 * delta = 0 gives +inf unless every p_s is 0.
 */
inline double chi_sq_max_bound(const ChiSqMaxBoundInput& in) {
  in.validate();
  const double d = in.delta;
  const double log_base = std::log(d) + (1.0 - d);  // log(delta e^{1-delta}) <= 0
  std::vector<double> a;
  a.reserve(in.sizes.size());
  for (long p : in.sizes) a.push_back(p == 0 ? 0.0 : -0.5 * static_cast<double>(p) * log_base);
  const double m = *std::max_element(a.begin(), a.end());
  if (std::isinf(m)) return kInf;
  double acc = 0.0;
  for (double v : a) acc += std::exp(v - m);
  return 2.0 / (1.0 - d) * (m + std::log(acc));
}

/// The tight form is the chi-square max bound itself.
inline double edf_upper_bound_tight(const std::vector<long>& sizes, double delta) {
  return chi_sq_max_bound({sizes, delta});
}

/// (2/(1-delta)) log|S| + p_max (log(1/delta)/(1-delta) - 1)
inline double edf_upper_bound_simplified(const std::vector<long>& sizes, double delta) {
  ChiSqMaxBoundInput in{sizes, delta};
  in.validate();
  const long pmax = *std::max_element(sizes.begin(), sizes.end());
  const double per_dim = delta == 0.0 ? kInf : -std::log(delta) / (1.0 - delta) - 1.0;
  const double lead = 2.0 / (1.0 - delta) * std::log(static_cast<double>(sizes.size()));
  return pmax == 0 ? lead : lead + static_cast<double>(pmax) * per_dim;
}

/**
 * MC estimate of E[max_s (W_s - p_s)] with W_s = sum_{i in s} Z_i^2 for one
 * shared Z ~ N(0, I_m), so the W_s are dependent chi-squares.
 */
inline McEstimate mc_chi_sq_max(const std::vector<std::vector<Index>>& sets, Index m, long reps,
                                std::uint64_t seed, unsigned threads = 0) {
  if (sets.empty()) throw std::invalid_argument("mc_chi_sq_max: no sets");
  for (const auto& s : sets) {
    for (Index i : s) {
      if (i < 0 || i >= m) throw std::out_of_range("mc_chi_sq_max: index outside 0..m-1");
    }
  }
  Mat table(reps, 1);
  parallel_for(reps, threads, [&](long r) {
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(r)});
    const Vec z2 = standard_normal(m, rng).array().square();
    double best = -kInf;
    for (const auto& s : sets) {
      double w = 0.0;
      for (Index i : s) w += z2[i];
      best = std::max(best, w - static_cast<double>(s.size()));
    }
    table(r, 0) = best;
  });
  return column_estimates(table)[0];
}

// ---------------------------------------------------------------------------
// Gaussian surface area of balls

/// log of Lambda_d(B_d(0, r)) = r^{d-1} e^{-r^2/2} / (2^{d/2-1} Gamma(d/2)).
inline double log_surface_area_centered(Index d, double r) {
  const double dd = static_cast<double>(d);
  return (dd - 1.0) * std::log(r) - 0.5 * r * r - (0.5 * dd - 1.0) * std::numbers::ln2 - std::lgamma(0.5 * dd);
}

inline double surface_area_centered(Index d, double r) {
  if (d < 1) throw std::invalid_argument("surface_area_centered: d must be >= 1");
  if (!(r > 0.0)) throw std::invalid_argument("surface_area_centered: radius must be positive");
  return std::exp(log_surface_area_centered(d, r));
}

struct SurfaceAreaEstimate {
  double value = 0.0;
  double std_error = 0.0;
  bool exact = true;
};

/// Antithetic uniform directions on the unit sphere in R^d, one column per pair.
struct SphereSample {
  Mat dirs;  // d x pairs

  SphereSample(Index d, long pairs, std::uint64_t seed) : dirs(d, pairs) {
    if (d < 1) throw std::invalid_argument("SphereSample: d must be >= 1");
    if (pairs < 2) throw std::invalid_argument("SphereSample: need at least 2 pairs");
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(d)});
    for (long k = 0; k < pairs; ++k) {
      Vec z = standard_normal(d, rng);
      double nz = z.norm();
      while (nz == 0.0) {
        z = standard_normal(d, rng);
        nz = z.norm();
      }
      dirs.col(k) = z / nz;
    }
  }
  Index dim() const { return dirs.rows(); }
  long pairs() const { return static_cast<long>(dirs.cols()); }
};

inline constexpr long kSurfaceDirections = 100000;

namespace detail {

/**
 * Sphere MC for each column of `centers`. On the sphere |c + r w|^2 =
 * |c|^2 + r^2 + 2 r c.w, so the antithetic pair average is K cosh(r c.w).
 */
inline std::vector<SurfaceAreaEstimate> surface_area_mc(const Mat& centers, double r, const SphereSample& sample) {
  const Index d = centers.rows();
  if (sample.dim() != d) throw std::invalid_argument("surface_area_mc: sample dimension mismatch");
  const double dd = static_cast<double>(d);
  const double log_area = (dd - 1.0) * std::log(r) + std::numbers::ln2 + 0.5 * dd * std::log(std::numbers::pi) -
                          std::lgamma(0.5 * dd);
  const double log_norm = -0.5 * dd * std::log(2.0 * std::numbers::pi);
  const Mat dots = sample.dirs.transpose() * centers;  // pairs x W
  std::vector<SurfaceAreaEstimate> out(static_cast<std::size_t>(centers.cols()));
  for (Index w = 0; w < centers.cols(); ++w) {
    const double c2 = centers.col(w).squaredNorm();
    const double logk = log_area + log_norm - 0.5 * (c2 + r * r);
    Mat col(sample.pairs(), 1);
    for (long k = 0; k < sample.pairs(); ++k) {
      const double t = std::abs(r * dots(k, w));
      col(k, 0) = std::exp(logk + t) * 0.5 * (1.0 + std::exp(-2.0 * t));
    }
    const auto e = column_estimates(col)[0];
    out[static_cast<std::size_t>(w)] = {e.mean, e.std_error, false};
  }
  return out;
}

}  // namespace detail

/**
 * Lambda_d(B_d(center, radius)). Closed form when center = 0; otherwise sphere
 * MC with `directions` antithetic directions (value and MC standard error).
 */
inline SurfaceAreaEstimate gaussian_surface_area_ball(const Vec& center, double radius, std::uint64_t seed = 1,
                                                      long directions = kSurfaceDirections) {
  const Index d = center.size();
  if (d < 1) throw std::invalid_argument("gaussian_surface_area_ball: d must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("gaussian_surface_area_ball: radius must be positive");
  if (center.squaredNorm() == 0.0) return {surface_area_centered(d, radius), 0.0, true};
  const SphereSample sample(d, std::max(2L, directions / 2), seed);
  return detail::surface_area_mc(center, radius, sample)[0];
}

/// Sphere MC without the closed-form shortcut at the origin.
inline SurfaceAreaEstimate gaussian_surface_area_ball_mc(const Vec& center, double radius, std::uint64_t seed = 1,
                                                         long directions = kSurfaceDirections) {
  if (center.size() < 1) throw std::invalid_argument("gaussian_surface_area_ball_mc: d must be >= 1");
  if (!(radius > 0.0)) throw std::invalid_argument("gaussian_surface_area_ball_mc: radius must be positive");
  const SphereSample sample(center.size(), std::max(2L, directions / 2), seed);
  return detail::surface_area_mc(center, radius, sample)[0];
}

// ---------------------------------------------------------------------------
// Gas stations

struct GasStationResult {
  std::size_t index = 0;         // smallest valid rotation start
  std::size_t multiplicity = 0;  // number of valid starts (> 1 only for periodic w)
};

/**
 * Start i is valid when w_i + ... + w_{i+q-1} <= 2q (indices mod d) for all q.
 * With S_k = sum_{t<k} (w_t - 2) and S_d = 0, that holds exactly when S_i is a
 * maximum of S_0..S_{d-1}.
 */
inline GasStationResult gas_stations_rotation(const std::vector<double>& w, double tol = 1e-9) {
  const std::size_t d = w.size();
  if (d == 0) throw std::invalid_argument("gas_stations_rotation: empty vector");
  double total = 0.0;
  for (double v : w) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw std::domain_error("gas_stations_rotation: entries must be >= 0");
    total += v;
  }
  if (std::abs(total - 2.0 * static_cast<double>(d)) > tol) {
    throw std::domain_error("gas_stations_rotation: entries must sum to 2d");
  }
  std::vector<double> s(d, 0.0);
  for (std::size_t k = 1; k < d; ++k) s[k] = s[k - 1] + (w[k - 1] - 2.0);
  const double best = *std::max_element(s.begin(), s.end());
  GasStationResult out;
  bool found = false;
  for (std::size_t k = 0; k < d; ++k) {
    if (s[k] >= best - tol) {
      if (!found) out.index = k;
      found = true;
      ++out.multiplicity;
    }
  }
  return out;
}

/// Direct check of one rotation start, used as a brute-force reference.
inline bool gas_station_start_valid(const std::vector<double>& w, std::size_t start, double tol = 1e-9) {
  const std::size_t d = w.size();
  double acc = 0.0;
  for (std::size_t q = 1; q <= d; ++q) {
    acc += w[(start + q - 1) % d];
    if (acc > 2.0 * static_cast<double>(q) + tol) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Nested chains

/// sum_{d=1}^p sqrt(2d) (1 + 1/d) Lambda_d(B_d(0, sqrt(2d))), always below 10.
inline double nested_null_edf_bound(long p) {
  if (p < 1) throw std::invalid_argument("nested_null_edf_bound: p must be >= 1");
  double acc = 0.0;
  for (long d = 1; d <= p; ++d) {
    const double dd = static_cast<double>(d);
    acc += std::sqrt(2.0 * dd) * (1.0 + 1.0 / dd) * std::exp(log_surface_area_centered(d, std::sqrt(2.0 * dd)));
  }
  return acc;
}

/**
 * Stirling-based chain for the constant: (1/sqrt(pi)) sum_d (sqrt(d) + 1/sqrt(d)) (2/e)^{d/2}
 * split into its two pieces, each summed to N and closed with a geometric tail.
 */
struct NestedNullStirling {
  double sqrt_part = 0.0;      // below 8.21
  double inv_sqrt_part = 0.0;  // below 1.75
  double total() const { return sqrt_part + inv_sqrt_part; }
};

inline NestedNullStirling nested_null_stirling(long N = 1000) {
  if (N < 1) throw std::invalid_argument("nested_null_stirling: N must be >= 1");
  const double x = std::sqrt(2.0 / std::numbers::e);
  const double rpi = 1.0 / std::sqrt(std::numbers::pi);
  NestedNullStirling out;
  for (long d = 1; d <= N; ++d) {
    const double dd = static_cast<double>(d);
    const double g = std::pow(x, dd);
    out.sqrt_part += std::sqrt(dd) * g;
    out.inv_sqrt_part += g / std::sqrt(dd);
  }
  const double nn = static_cast<double>(N);
  const double xn = std::pow(x, nn);
  // sum_{d>N} d x^d = x d/dx sum_{d>N} x^d
  const double tail_d = x * ((nn + 1.0) * xn / (1.0 - x) + xn * x / ((1.0 - x) * (1.0 - x)));
  const double tail_1 = xn * x / (1.0 - x);
  out.sqrt_part = rpi * (out.sqrt_part + tail_d);
  out.inv_sqrt_part = rpi * (out.inv_sqrt_part + tail_1);
  return out;
}

/// A bound evaluated partly by Monte Carlo.
struct ApproxBound {
  double value = 0.0;
  double std_error = 0.0;
  bool approximate = false;
};

/// sqrt(2p) p (p+1): every Gaussian surface area is at most 1.
inline double general_theta_loose_cap(long p) {
  const double pp = static_cast<double>(p);
  return std::sqrt(2.0 * pp) * pp * (pp + 1.0);
}

namespace detail {

inline Mat window_centers(const Vec& mu, Index d) {
  const Index w = mu.size() - d + 1;
  Mat c(d, w);
  for (Index j = 0; j < w; ++j) c.col(j) = mu.segment(j, d);
  return c;
}

}  // namespace detail

/**
 * sum_d sqrt(2d)(d+1) max_j Lambda_d(B_d(mu_{(j+1):(j+d)}, sqrt(2d))) over all
 * windows j = 0..p-d, where mu = V^T theta0 / sigma for the chain's
 * Gram-Schmidt basis V. Off-center areas by sphere MC; the reported SE is
 * that of the maximizing window in each d.
 */
inline ApproxBound general_theta_bound(const Vec& mu, std::uint64_t seed = 1, long directions = kSurfaceDirections) {
  const Index p = mu.size();
  if (p < 1) throw std::invalid_argument("general_theta_bound: mu must be nonempty");
  ApproxBound out;
  double var = 0.0;
  for (Index d = 1; d <= p; ++d) {
    const double dd = static_cast<double>(d);
    const double r = std::sqrt(2.0 * dd);
    const Mat centers = detail::window_centers(mu, d);
    std::vector<SurfaceAreaEstimate> est;
    if (centers.squaredNorm() == 0.0) {
      est.assign(static_cast<std::size_t>(centers.cols()), {surface_area_centered(d, r), 0.0, true});
    } else {
      const SphereSample sample(d, std::max(2L, directions / 2), seed);
      est = detail::surface_area_mc(centers, r, sample);
    }
    const auto best = std::max_element(est.begin(), est.end(),
                                       [](const auto& a, const auto& b) { return a.value < b.value; });
    const double f = std::sqrt(2.0 * dd) * (dd + 1.0);
    out.value += f * best->value;
    var += f * f * best->std_error * best->std_error;
    out.approximate = out.approximate || !best->exact;
  }
  out.std_error = std::sqrt(var);
  return out;
}

namespace detail {

inline double chi_sq_sf(Index dof, double lambda, double x) {
  if (dof == 0) return 1.0;
  if (x <= 0.0) return 1.0;
  if (lambda == 0.0) {
    return boost::math::cdf(boost::math::complement(boost::math::chi_squared(static_cast<double>(dof)), x));
  }
  return boost::math::cdf(
      boost::math::complement(boost::math::non_central_chi_squared(static_cast<double>(dof), lambda), x));
}

inline double chi_sq_cdf(Index dof, double lambda, double x) {
  if (dof == 0) return 1.0;
  if (x <= 0.0) return 0.0;
  if (lambda == 0.0) return boost::math::cdf(boost::math::chi_squared(static_cast<double>(dof)), x);
  return boost::math::cdf(boost::math::non_central_chi_squared(static_cast<double>(dof), lambda), x);
}

}  // namespace detail

/**
 * sqrt(2) sum_{0<=j<k<=p} sqrt(k-j) P(W_j(|mu_{1:j}|^2) > 2(j-1))
 *   P(W_{p-k}(|mu_{(k+1):p}|^2) < 2(p-k)) Lambda_{k-j}(B(mu_{(j+1):k}, sqrt(2(k-j)))).
 * A chi-square with 0 degrees of freedom contributes probability 1.
 */
inline ApproxBound alternate_theta_bound(const Vec& mu, std::uint64_t seed = 1,
                                         long directions = kSurfaceDirections) {
  const Index p = mu.size();
  if (p < 1) throw std::invalid_argument("alternate_theta_bound: mu must be nonempty");
  Vec head(p + 1);  // |mu_{1:j}|^2
  head[0] = 0.0;
  for (Index j = 1; j <= p; ++j) head[j] = head[j - 1] + mu[j - 1] * mu[j - 1];
  ApproxBound out;
  double var = 0.0;
  for (Index d = 1; d <= p; ++d) {
    const double r = std::sqrt(2.0 * static_cast<double>(d));
    const Mat centers = detail::window_centers(mu, d);
    std::vector<SurfaceAreaEstimate> est;
    if (centers.squaredNorm() == 0.0) {
      est.assign(static_cast<std::size_t>(centers.cols()), {surface_area_centered(d, r), 0.0, true});
    } else {
      const SphereSample sample(d, std::max(2L, directions / 2), seed);
      est = detail::surface_area_mc(centers, r, sample);
    }
    for (Index j = 0; j + d <= p; ++j) {
      const Index k = j + d;
      const double pj = detail::chi_sq_sf(j, head[j], 2.0 * static_cast<double>(j - 1));
      const double pk = detail::chi_sq_cdf(p - k, head[p] - head[k], 2.0 * static_cast<double>(p - k));
      const double f = std::numbers::sqrt2 * std::sqrt(static_cast<double>(d)) * pj * pk;
      const auto& e = est[static_cast<std::size_t>(j)];
      out.value += f * e.value;
      var += f * f * e.std_error * e.std_error;
      out.approximate = out.approximate || !e.exact;
    }
  }
  out.std_error = std::sqrt(var);
  return out;
}

// ---------------------------------------------------------------------------
// Best subset

/// f(delta) = (2/(1-delta)) log(1 + (delta e^{1-delta})^{-1/2})
inline double best_subset_f(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw std::domain_error("best_subset_f: delta must lie in (0, 1)");
  return 2.0 / (1.0 - delta) * std::log1p(std::exp(-0.5 * (std::log(delta) + 1.0 - delta)));
}

struct BestSubsetConstant {
  double value = 0.0;  // min_delta f(delta), about 2.289
  double delta = 0.0;  // minimizer
  double half() const { return 0.5 * value; }
};

inline BestSubsetConstant best_subset_constant() {
  const auto r = boost::math::tools::brent_find_minima(best_subset_f, 1e-6, 1.0 - 1e-6, 52);
  return {r.second, r.first};
}

}  // namespace suretune
