#pragma once

// Bootstrap estimates of df and excess df for a SURE-tuned rule, with the
// parametric, big-model and residual samplers.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

#include "core.hpp"
#include "monte_carlo.hpp"
#include "parallel.hpp"

namespace suretune {

enum class BootstrapSampler { parametric, bigmodel, residual };

inline const char* to_string(BootstrapSampler s) {
  switch (s) {
    case BootstrapSampler::parametric: return "parametric";
    case BootstrapSampler::bigmodel: return "bigmodel";
    case BootstrapSampler::residual: return "residual";
  }
  return "?";
}

inline EdfMethod edf_method(BootstrapSampler s) {
  switch (s) {
    case BootstrapSampler::parametric: return EdfMethod::bootstrap_parametric;
    case BootstrapSampler::bigmodel: return EdfMethod::bootstrap_bigmodel;
    case BootstrapSampler::residual: return EdfMethod::bootstrap_residual;
  }
  return EdfMethod::bootstrap_parametric;
}

struct BootstrapConfig {
  long B = 1000;
  BootstrapSampler sampler = BootstrapSampler::parametric;
  double c = 1.0;  // variance multiplier of the big-model sampler, in (0, 1]
  std::uint64_t seed = 1;
  unsigned threads = 0;

  void validate() const {
    if (B < 2) throw std::invalid_argument("BootstrapConfig: B must be >= 2");
    if (sampler == BootstrapSampler::bigmodel && !(c > 0.0 && c <= 1.0)) {
      throw std::invalid_argument("BootstrapConfig: c must lie in (0, 1]");
    }
  }
};

/**
 * Y* = center + resampled residuals: each coordinate draws one of the
 * residuals uniformly with replacement. Uses no noise scale.
 */
template <class Engine>
Vec residual_draw(const Vec& center, const Vec& residuals, Engine& rng) {
  std::uniform_int_distribution<Index> pick(0, residuals.size() - 1);
  Vec out(center.size());
  for (Index i = 0; i < center.size(); ++i) out[i] = center[i] + residuals[pick(rng)];
  return out;
}

/// All pieces of one bootstrap run at a fixed Y.
struct BootstrapRun {
  TunedFit fit;          // SURE-tuned fit at the observed Y
  McEstimate df;         // (1/B) sum_b (1/sigma^2) theta*_b^T (Y*_b - Ybar*)
  McEstimate naive_df;   // (1/B) sum_b df_hat at the bootstrap tuning
  McEstimate edf;        // df - naive_df
};

/**
 * Draws Y*_1..Y*_B from the configured sampler, refits the tuned rule on each,
 * then forms the centered covariance term with Ybar* computed after all draws.
 */
template <EstimatorFamily F>
BootstrapRun bootstrap_run(const F& family, const Vec& y, const BootstrapConfig& cfg) {
  cfg.validate();
  require_dim(y, family.dim(), "bootstrap_run");
  const Index n = family.dim();
  const NoiseSpec& noise = family.noise();
  BootstrapRun run;
  run.fit = family.tune(y);
  const Vec center = cfg.sampler == BootstrapSampler::bigmodel ? y : run.fit.theta_hat;
  const Vec residuals = y - run.fit.theta_hat;
  const double scale = cfg.sampler == BootstrapSampler::bigmodel ? std::sqrt(cfg.c) : 1.0;

  Mat ys(n, cfg.B), thetas(n, cfg.B);
  Vec naive(cfg.B);
  parallel_for(cfg.B, cfg.threads, [&](long b) {
    auto rng = make_stream(cfg.seed, {static_cast<std::uint64_t>(b)});
    Vec ystar;
    if (cfg.sampler == BootstrapSampler::residual) {
      ystar = residual_draw(center, residuals, rng);
    } else {
      const Vec z = standard_normal(n, rng);
      ystar = noise.is_homoskedastic() ? Vec(center + scale * noise.sigma() * z)
                                       : Vec(center + scale * noise.sigmas().cwiseProduct(z));
    }
    const TunedFit fb = family.tune(ystar);
    ys.col(b) = ystar;
    thetas.col(b) = fb.theta_hat;
    naive[b] = fb.naive_df_at_shat;
  });
  const Vec ybar = ys.rowwise().mean();
  Mat table(cfg.B, 3);
  for (long b = 0; b < cfg.B; ++b) {
    const double cov = detail::scaled_inner(noise, thetas.col(b), ys.col(b) - ybar);
    table(b, 0) = cov;
    table(b, 1) = naive[b];
    table(b, 2) = cov - naive[b];
  }
  const auto e = column_estimates(table);
  run.df = e[0];
  run.naive_df = e[1];
  run.edf = e[2];
  return run;
}

template <EstimatorFamily F>
EdfReport bootstrap_edf(const F& family, const Vec& y, const BootstrapConfig& cfg) {
  const auto run = bootstrap_run(family, y, cfg);
  return {edf_method(cfg.sampler), run.edf.mean, run.edf.std_error, run.edf.reps};
}

/// The covariance term alone. Known to be unreliable in high dimensions.
template <EstimatorFamily F>
EdfReport bootstrap_df(const F& family, const Vec& y, const BootstrapConfig& cfg) {
  const auto run = bootstrap_run(family, y, cfg);
  return {edf_method(cfg.sampler), run.df.mean, run.df.std_error, run.df.reps};
}

/// Minimized SURE plus the bootstrap excess optimism 2 sigma^2 edf.
template <EstimatorFamily F>
double corrected_error_estimate(const F& family, const Vec& y, const BootstrapConfig& cfg) {
  const auto run = bootstrap_run(family, y, cfg);
  return run.fit.sure_min + optimism_scale(family.noise()) * run.edf.mean;
}

}  // namespace suretune
