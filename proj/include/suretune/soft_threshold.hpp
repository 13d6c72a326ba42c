#pragma once

// Soft-thresholding theta_s,i(Y) = sign(Y_i)(|Y_i| - s)_+ with exact SURE
// minimization over the order statistics of |Y|, the coordinate scan that
// locates jumps of the tuned estimator, and the df lower-bound check.

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <boost/math/tools/minima.hpp>

#include "core.hpp"
#include "monte_carlo.hpp"

namespace suretune {

/// sign(y)(|y| - s)_+ coordinatewise; s = inf gives 0.
inline Vec soft_threshold(const Vec& y, double s) {
  if (std::isinf(s)) return Vec::Zero(y.size());
  Vec out(y.size());
  for (Index i = 0; i < y.size(); ++i) {
    const double a = std::abs(y[i]) - s;
    out[i] = a > 0.0 ? std::copysign(a, y[i]) : 0.0;
  }
  return out;
}

/// #{i : |y_i| > s}.
inline Index active_count(const Vec& y, double s) {
  Index c = 0;
  for (Index i = 0; i < y.size(); ++i) c += std::abs(y[i]) > s;
  return c;
}

/// #{i : |y_i| >= s}.
inline Index active_count_closed(const Vec& y, double s) {
  Index c = 0;
  for (Index i = 0; i < y.size(); ++i) c += std::abs(y[i]) >= s;
  return c;
}

/**
 * Exact risk E(theta_s(Y) - mu)^2 of scalar soft-thresholding at threshold
 * lambda when Y ~ N(mu, 1).
 */
inline double soft_threshold_unit_risk(double lambda, double mu) {
  if (std::isinf(lambda)) return mu * mu;
  const double l2 = lambda * lambda;
  const double inside = std_normal_cdf(lambda - mu) - std_normal_cdf(-lambda - mu);
  const double r = 1.0 + l2 + (mu * mu - l2 - 1.0) * inside - (lambda - mu) * std_normal_pdf(lambda + mu) -
                   (lambda + mu) * std_normal_pdf(lambda - mu);
  return std::max(r, 0.0);
}

/**
 * Soft-thresholding family over s in [0, inf]. The df estimate counts
 * coordinates strictly above the threshold; this equals the divergence of
 * theta_s almost everywhere and makes SURE lower semicontinuous in s, so the
 * minimum over the order statistics is attained.
 */
class SoftThreshFamily {
 public:
  SoftThreshFamily(Index n, double sigma)
      : n_(n), noise_(NoiseSpec::homoskedastic(sigma)), domain_(TuningDomain::interval(0.0, kInf)) {
    if (n < 1) throw std::invalid_argument("SoftThreshFamily: n must be >= 1");
  }

  Index dim() const { return n_; }
  double sigma() const { return noise_.sigma(); }
  const NoiseSpec& noise() const { return noise_; }
  const TuningDomain& domain() const { return domain_; }

  Vec estimate(const Tuning& s, const Vec& y) const {
    check(s, y, "SoftThreshFamily::estimate");
    return soft_threshold(y, s.scalar());
  }
  double naive_df(const Tuning& s, const Vec& y) const {
    check(s, y, "SoftThreshFamily::naive_df");
    if (s.is_infinite()) return 0.0;
    return static_cast<double>(active_count(y, s.scalar()));
  }

  /**
   * Minimizes k |Y|_(k)^2 + sum_{j>k} |Y|_(j)^2 + 2 sigma^2 (k-1) over
   * k = 1..n+1 with |Y|_(n+1) = 0. Ties go to the larger threshold.
   */
  TunedFit tune(const Vec& y) const {
    require_dim(y, n_, "SoftThreshFamily::tune");
    const auto k_hat = select(y);
    const double s = k_hat.threshold;
    TunedFit fit;
    fit.s_hat = Tuning::value(s);
    fit.theta_hat = soft_threshold(y, s);
    fit.naive_df_at_shat = static_cast<double>(active_count(y, s));
    fit.sure_min = sure_from_parts(noise_, y, fit.theta_hat, fit.naive_df_at_shat);
    return fit;
  }

  /// Selected order-statistic index k (1-based), threshold, and the coordinate defining it (-1 for k = n+1).
  struct Selection {
    Index k = 0;
    double threshold = 0.0;
    Index coordinate = -1;
    double criterion = 0.0;
  };

  Selection select(const Vec& y) const {
    std::vector<Index> order(static_cast<std::size_t>(n_));
    std::iota(order.begin(), order.end(), Index{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](Index a, Index b) { return std::abs(y[a]) > std::abs(y[b]); });
    // tail[k] = sum_{j > k} |Y|_(j)^2 in 1-based order statistics.
    std::vector<double> tail(static_cast<std::size_t>(n_) + 2, 0.0);
    for (Index k = n_; k >= 1; --k) {
      const double a = y[order[static_cast<std::size_t>(k - 1)]];
      tail[static_cast<std::size_t>(k - 1)] = tail[static_cast<std::size_t>(k)] + a * a;
    }
    const double two_s2 = 2.0 * sigma() * sigma();
    Selection best;
    for (Index k = 1; k <= n_ + 1; ++k) {
      const double a = k <= n_ ? std::abs(y[order[static_cast<std::size_t>(k - 1)]]) : 0.0;
      const double val = static_cast<double>(k) * a * a + tail[static_cast<std::size_t>(k)] +
                         two_s2 * static_cast<double>(k - 1);
      if (k == 1 || val < best.criterion) {
        best.k = k;
        best.threshold = a;
        best.coordinate = k <= n_ ? order[static_cast<std::size_t>(k - 1)] : -1;
        best.criterion = val;
      }
    }
    return best;
  }

  /// Exact risk at fixed s from the closed-form scalar risk.
  double exact_risk(const Tuning& s, const GaussianModel& model) const {
    const double sig = model.noise().sigma();
    const double lam = s.is_infinite() ? kInf : s.scalar() / sig;
    double r = 0.0;
    for (Index i = 0; i < n_; ++i) r += soft_threshold_unit_risk(lam, model.theta0()[i] / sig);
    return sig * sig * r;
  }

  /// Risk-minimizing threshold: 2000-point grid, then Brent refinement around the best cell.
  OracleResult oracle(const GaussianModel& model) const {
    require_dim(model.theta0(), n_, "SoftThreshFamily::oracle");
    const double sig = model.noise().sigma();
    const double hi = (model.theta0().cwiseAbs().maxCoeff() / sig + 8.0) * sig;
    auto risk = [&](double s) { return exact_risk(Tuning::value(s), model); };
    const int grid = 2000;
    int best = 0;
    double best_val = risk(0.0);
    for (int g = 1; g <= grid; ++g) {
      const double v = risk(hi * g / grid);
      if (v < best_val) best = g, best_val = v;
    }
    const double lo_s = hi * std::max(0, best - 1) / grid;
    const double hi_s = hi * std::min(grid, best + 1) / grid;
    const auto r = boost::math::tools::brent_find_minima(risk, lo_s, hi_s, 40);
    OracleResult out;
    double s0 = hi * best / grid;
    if (r.second < best_val) s0 = r.first, best_val = r.second;
    // s = inf is the limit of large thresholds; prefer it when it is as good up to rounding.
    const double zero_risk = model.theta0().squaredNorm();
    if (zero_risk <= best_val + 1e-10 * sig * sig) {
      out.s0 = Tuning::infinity();
      best_val = zero_risk;
    } else {
      out.s0 = Tuning::value(s0);
    }
    out.oracle_risk = best_val;
    out.oracle_err = best_val + static_cast<double>(n_) * sig * sig;
    return out;
  }

 private:
  void check(const Tuning& s, const Vec& y, const char* where) const {
    if (!domain_.contains(s)) {
      throw std::domain_error(std::string(where) + ": tuning value " + s.to_string() + " outside [0, inf]");
    }
    require_dim(y, n_, where);
  }

  Index n_;
  NoiseSpec noise_;
  TuningDomain domain_;
};

inline TunedFit tune_soft_threshold(const Vec& y, double sigma) {
  return SoftThreshFamily(y.size(), sigma).tune(y);
}

/// A discontinuity of t -> theta_hat_i(t, Y_-i).
struct Jump {
  double location = 0.0;
  double jump = 0.0;       // right limit minus left limit
  double s_left = 0.0;     // selected threshold just left of the jump
  double s_right = 0.0;    // selected threshold just right of the jump
  Index k_left = 0;        // selected order-statistic index just left
  Index k_right = 0;
};

/**
 * Scans coordinate i of the SURE-tuned soft-thresholding estimator along
 * increasing t over grid (Y_i replaced by t, the rest of y fixed). A cell
 * whose endpoints select different threshold coordinates is bisected to the
 * switch point; jumps with |jump| <= 1e-6 sigma are treated as continuous.
 */
inline std::vector<Jump> scan_jump_signs(const Vec& y, Index i, const Vec& grid, double sigma) {
  if (i < 0 || i >= y.size()) throw std::out_of_range("scan_jump_signs: coordinate out of range");
  for (Index g = 1; g < grid.size(); ++g) {
    if (!(grid[g] > grid[g - 1])) throw std::invalid_argument("scan_jump_signs: grid must be increasing");
  }
  const SoftThreshFamily fam(y.size(), sigma);
  Vec work = y;
  auto sel_at = [&](double t) {
    work[i] = t;
    return fam.select(work);
  };
  auto value_at = [&](double t, const SoftThreshFamily::Selection& s) {
    const double a = std::abs(t) - s.threshold;
    return a > 0.0 ? std::copysign(a, t) : 0.0;
  };
  std::vector<Jump> out;
  for (Index g = 1; g < grid.size(); ++g) {
    double lo = grid[g - 1], hi = grid[g];
    auto s_lo = sel_at(lo);
    auto s_hi = sel_at(hi);
    if (s_lo.coordinate == s_hi.coordinate) continue;
    for (int it = 0; it < 200 && hi - lo > 1e-13 * (1.0 + std::abs(hi)); ++it) {
      const double mid = 0.5 * (lo + hi);
      auto s_mid = sel_at(mid);
      if (s_mid.coordinate == s_lo.coordinate) {
        lo = mid;
        s_lo = s_mid;
      } else {
        hi = mid;
        s_hi = s_mid;
      }
    }
    const double jump = value_at(hi, s_hi) - value_at(lo, s_lo);
    if (std::abs(jump) > 1e-6 * sigma) {
      out.push_back({0.5 * (lo + hi), jump, s_lo.threshold, s_hi.threshold, s_lo.k, s_hi.k});
    }
  }
  return out;
}

/// Monte Carlo comparison of df against the active-set sizes at the tuned threshold.
struct SoftThreshDfReport {
  McEstimate df;               // (1/sigma^2) E theta_hat^T (Y - theta0)
  McEstimate active_closed;    // E #{i : |Y_i| >= s_hat}
  McEstimate active_open;      // E #{i : |Y_i| > s_hat}, the plug-in df
  McEstimate margin;           // paired df - active_closed
  McEstimate edf;              // paired df - active_open
  double tolerance_se = 4.0;
  bool holds() const { return margin.mean >= -tolerance_se * margin.std_error; }
};

inline SoftThreshDfReport df_lower_bound_check(const GaussianModel& model, long reps, std::uint64_t seed,
                                               unsigned threads = 0) {
  detail::require_reps(reps, "df_lower_bound_check");
  if (!model.noise().is_homoskedastic()) {
    throw std::invalid_argument("df_lower_bound_check: model must be homoskedastic");
  }
  const SoftThreshFamily fam(model.dim(), model.noise().sigma());
  const double s2 = model.noise().sigma() * model.noise().sigma();
  Mat table(reps, 5);
  parallel_for(reps, threads, [&](long r) {
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(r), 0});
    const Vec y = draw(model, rng);
    const TunedFit fit = fam.tune(y);
    const double s = fit.s_hat.scalar();
    const double cov = fit.theta_hat.dot(y - model.theta0()) / s2;
    const auto closed = static_cast<double>(active_count_closed(y, s));
    table(r, 0) = cov;
    table(r, 1) = closed;
    table(r, 2) = fit.naive_df_at_shat;
    table(r, 3) = cov - closed;
    table(r, 4) = cov - fit.naive_df_at_shat;
  });
  const auto e = column_estimates(table);
  SoftThreshDfReport rep;
  rep.df = e[0];
  rep.active_closed = e[1];
  rep.active_open = e[2];
  rep.margin = e[3];
  rep.edf = e[4];
  return rep;
}

}  // namespace suretune
