#pragma once

// Monte Carlo oracles for prediction error, degrees of freedom and excess
// degrees of freedom, plus the oracle-gap check. These are the reference
// values every analytic and bootstrap estimate is tested against.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>

#include "core.hpp"
#include "parallel.hpp"

namespace suretune {

struct McOptions {
  long reps = 1000;
  std::uint64_t seed = 1;
  unsigned threads = 0;
};

enum class CovarianceForm { known_mean, sample_centered };

namespace detail {
inline void require_reps(long reps, const char* where) {
  if (reps < 2) throw std::invalid_argument(std::string(where) + ": reps must be >= 2");
}

/// sum_i a_i b_i / sigma_i^2 (or / sigma^2).
inline double scaled_inner(const NoiseSpec& noise, const Vec& a, const Vec& b) {
  if (noise.is_homoskedastic()) return a.dot(b) / (noise.sigma() * noise.sigma());
  return (a.array() * b.array() / noise.sigmas().array().square()).sum();
}
}  // namespace detail

/// Err = E ||Y* - rule(Y)||^2 (variance-scaled for heteroskedastic models).
template <class Rule>
McEstimate mc_prediction_error(const Rule& rule, const GaussianModel& model, long reps,
                               std::uint64_t seed, unsigned threads = 0) {
  detail::require_reps(reps, "mc_prediction_error");
  std::vector<double> vals(static_cast<std::size_t>(reps));
  parallel_for(reps, threads, [&](long r) {
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(r), 0});
    auto rng_test = make_stream(seed, {static_cast<std::uint64_t>(r), 1});
    const Vec y = draw(model, rng);
    const Vec y_star = draw(model, rng_test);
    vals[static_cast<std::size_t>(r)] = scaled_rss(model.noise(), y_star - rule(y));
  });
  return mean_estimate(vals);
}

/// Risk = E ||rule(Y) - theta0||^2 (variance-scaled for heteroskedastic models).
template <class Rule>
McEstimate mc_risk(const Rule& rule, const GaussianModel& model, long reps, std::uint64_t seed,
                   unsigned threads = 0) {
  detail::require_reps(reps, "mc_risk");
  std::vector<double> vals(static_cast<std::size_t>(reps));
  parallel_for(reps, threads, [&](long r) {
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(r), 0});
    const Vec y = draw(model, rng);
    vals[static_cast<std::size_t>(r)] = scaled_rss(model.noise(), rule(y) - model.theta0());
  });
  return mean_estimate(vals);
}

/**
 * df = sum_i Cov(theta_i(Y), Y_i) / sigma_i^2.
 *
 * known_mean uses mean over reps of theta(Y)^T (Y - theta0) / sigma^2.
 * sample_centered replaces theta0 by the across-replication mean of Y; its
 * standard error is computed from the per-replication centered products.
 */
template <class Rule>
McEstimate mc_df(const Rule& rule, const GaussianModel& model, long reps, std::uint64_t seed,
                 unsigned threads = 0, CovarianceForm form = CovarianceForm::known_mean) {
  detail::require_reps(reps, "mc_df");
  const Index n = model.dim();
  if (form == CovarianceForm::known_mean) {
    std::vector<double> vals(static_cast<std::size_t>(reps));
    parallel_for(reps, threads, [&](long r) {
      auto rng = make_stream(seed, {static_cast<std::uint64_t>(r), 0});
      const Vec y = draw(model, rng);
      vals[static_cast<std::size_t>(r)] =
          detail::scaled_inner(model.noise(), rule(y), y - model.theta0());
    });
    return mean_estimate(vals);
  }
  Mat ys(n, reps), thetas(n, reps);
  parallel_for(reps, threads, [&](long r) {
    auto rng = make_stream(seed, {static_cast<std::uint64_t>(r), 0});
    ys.col(r) = draw(model, rng);
    thetas.col(r) = rule(Vec(ys.col(r)));
  });
  const Vec ybar = ys.rowwise().mean();
  std::vector<double> vals(static_cast<std::size_t>(reps));
  const double bessel = static_cast<double>(reps) / static_cast<double>(reps - 1);
  for (long r = 0; r < reps; ++r) {
    vals[static_cast<std::size_t>(r)] =
        bessel * detail::scaled_inner(model.noise(), thetas.col(r), ys.col(r) - ybar);
  }
  return mean_estimate(vals);
}

/// Per-quantity Monte Carlo summary of a SURE-tuned rule.
struct TunedSummary {
  McEstimate df;              // (1/sigma^2) E theta_hat^T (Y - theta0)
  McEstimate naive_df;        // E df_hat_{s_hat(Y)}(Y)
  McEstimate edf;             // paired difference of the two above
  McEstimate sure_min;        // E min_s SURE_s(Y)
  McEstimate test_error;      // E ||Y* - theta_hat(Y)||^2
  McEstimate risk;            // E ||theta_hat(Y) - theta0||^2
  McEstimate observed_excess; // (||Y* - theta_hat||^2 - SURE_min) / (2 sigma^2)
};

template <EstimatorFamily F>
TunedSummary mc_tuned_summary(const F& family, const GaussianModel& model, const McOptions& opt) {
  detail::require_reps(opt.reps, "mc_tuned_summary");
  require_dim(model.theta0(), family.dim(), "mc_tuned_summary");
  const auto& noise = model.noise();
  const double scale = optimism_scale(noise);
  Mat table(opt.reps, 7);
  parallel_for(opt.reps, opt.threads, [&](long r) {
    auto rng = make_stream(opt.seed, {static_cast<std::uint64_t>(r), 0});
    auto rng_test = make_stream(opt.seed, {static_cast<std::uint64_t>(r), 1});
    const Vec y = draw(model, rng);
    const Vec y_star = draw(model, rng_test);
    const TunedFit fit = family.tune(y);
    const double cov = detail::scaled_inner(noise, fit.theta_hat, y - model.theta0());
    const double test = scaled_rss(noise, y_star - fit.theta_hat);
    table(r, 0) = cov;
    table(r, 1) = fit.naive_df_at_shat;
    table(r, 2) = cov - fit.naive_df_at_shat;
    table(r, 3) = fit.sure_min;
    table(r, 4) = test;
    table(r, 5) = scaled_rss(noise, fit.theta_hat - model.theta0());
    table(r, 6) = (test - fit.sure_min) / scale;
  });
  const auto est = column_estimates(table);
  return {est[0], est[1], est[2], est[3], est[4], est[5], est[6]};
}

/**
 * Excess df of the SURE-tuned rule: MC df minus the mean plug-in df, using
 * the same draws for both terms.
 */
template <EstimatorFamily F>
EdfReport mc_edf(const F& family, const GaussianModel& model, long reps, std::uint64_t seed,
                 unsigned threads = 0) {
  const auto s = mc_tuned_summary(family, model, McOptions{reps, seed, threads});
  return {EdfMethod::monte_carlo, s.edf.mean, s.edf.std_error, s.edf.reps};
}

/// Risk-minimizing fixed member of a family and its exact error.
struct OracleResult {
  Tuning s0 = Tuning::value(0.0);
  double oracle_err = 0.0;   // exact Err(theta_{s0})
  double oracle_risk = 0.0;  // exact Risk(theta_{s0})
};

template <class F>
concept HasOracle = requires(const F& f, const GaussianModel& m) {
  { f.oracle(m) } -> std::convertible_to<OracleResult>;
};

/// Delegates to the family's exact oracle (closed form or exhaustive evaluation).
template <class F>
  requires HasOracle<F>
OracleResult oracle_tuning(const F& family, const GaussianModel& model) {
  require_dim(model.theta0(), family.dim(), "oracle_tuning");
  return family.oracle(model);
}

struct OracleGapReport {
  McEstimate err_tuned;      // MC Err(theta_{s_hat})
  double oracle_err = 0.0;   // exact Err(theta_{s0})
  McEstimate excess_opt;     // MC ExOpt = 2 sigma^2 edf
  McEstimate sure_min;       // MC E[min SURE]
  double tolerance_se = 4.0;
  /// Err_tuned - (oracle + ExOpt), and its combined SE.
  double gap_margin = 0.0;
  double gap_se = 0.0;
  /// E[min SURE] - oracle, and its SE.
  double sure_margin = 0.0;
  bool gap_holds = false;
  bool sure_below_oracle = false;
  bool ok() const { return gap_holds && sure_below_oracle; }
};

/**
 * Checks Err(theta_{s_hat}) <= Err(theta_{s0}) + ExOpt(theta_{s_hat}) and
 * E[min_s SURE_s] <= Err(theta_{s0}), each within tolerance_se combined SEs.
 */
template <EstimatorFamily F>
  requires HasOracle<F>
OracleGapReport oracle_gap_check(const F& family, const GaussianModel& model,
                                 const McOptions& opt, double tolerance_se = 4.0) {
  const auto summary = mc_tuned_summary(family, model, opt);
  const auto oracle = oracle_tuning(family, model);
  const double scale = optimism_scale(model.noise());
  OracleGapReport rep;
  rep.err_tuned = summary.test_error;
  rep.oracle_err = oracle.oracle_err;
  rep.excess_opt = {scale * summary.edf.mean, scale * summary.edf.std_error, summary.edf.reps};
  rep.sure_min = summary.sure_min;
  rep.tolerance_se = tolerance_se;
  rep.gap_margin = rep.err_tuned.mean - (rep.oracle_err + rep.excess_opt.mean);
  rep.gap_se = combined_se(rep.err_tuned, rep.excess_opt);
  rep.sure_margin = rep.sure_min.mean - rep.oracle_err;
  rep.gap_holds = rep.gap_margin <= tolerance_se * rep.gap_se;
  rep.sure_below_oracle = rep.sure_margin <= tolerance_se * rep.sure_min.std_error;
  return rep;
}

}  // namespace suretune
