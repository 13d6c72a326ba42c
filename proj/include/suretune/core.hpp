#pragma once

// Data model, tuning values, and the estimator-family abstraction shared by
// every module. SURE evaluation and the generic tuning entry point live here.

#include <charconv>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

namespace suretune {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/**
 * A tuning parameter value: a finite nonnegative real, the distinguished
 * value +infinity (admissible for shrinkage families, where the estimate is
 * the zero vector), or a label indexing a discrete collection.
 */
class Tuning {
 public:
  enum class Kind { finite, infinite, label };

  static Tuning value(double s) {
    if (!std::isfinite(s)) {
      throw std::domain_error("Tuning::value: use Tuning::infinity() for non-finite values");
    }
    return Tuning(Kind::finite, s, 0);
  }
  static Tuning infinity() { return Tuning(Kind::infinite, kInf, 0); }
  static Tuning label(std::size_t index) { return Tuning(Kind::label, 0.0, index); }

  Kind kind() const { return kind_; }
  bool is_infinite() const { return kind_ == Kind::infinite; }
  bool is_label() const { return kind_ == Kind::label; }
  bool is_scalar() const { return kind_ != Kind::label; }

  /// Real value of a continuous tuning (+inf for the infinite value).
  double scalar() const {
    if (kind_ == Kind::label) {
      throw std::logic_error("Tuning::scalar: discrete label has no scalar value");
    }
    return value_;
  }
  std::size_t index() const {
    if (kind_ != Kind::label) {
      throw std::logic_error("Tuning::index: continuous tuning has no label index");
    }
    return index_;
  }

  friend bool operator==(const Tuning& a, const Tuning& b) {
    if (a.kind_ != b.kind_) return false;
    switch (a.kind_) {
      case Kind::finite: return a.value_ == b.value_;
      case Kind::infinite: return true;
      case Kind::label: return a.index_ == b.index_;
    }
    return false;
  }

  std::string to_string() const {
    switch (kind_) {
      case Kind::finite: {
        char buf[64];
        const auto r = std::to_chars(buf, buf + sizeof buf, value_, std::chars_format::general, 12);
        return std::string(buf, r.ptr);
      }
      case Kind::infinite: return "inf";
      case Kind::label: return "#" + std::to_string(index_);
    }
    return {};
  }

 private:
  Tuning(Kind k, double v, std::size_t i) : kind_(k), value_(v), index_(i) {}
  Kind kind_;
  double value_;
  std::size_t index_;
};

/// Noise specification: a common standard deviation or one per coordinate.
class NoiseSpec {
 public:
  static NoiseSpec homoskedastic(double sigma) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("NoiseSpec: sigma must be positive and finite");
    }
    return NoiseSpec(sigma);
  }
  static NoiseSpec heteroskedastic(Vec sigmas) {
    if (sigmas.size() < 1) throw std::invalid_argument("NoiseSpec: empty sigma vector");
    for (Index i = 0; i < sigmas.size(); ++i) {
      if (!(sigmas[i] > 0.0) || !std::isfinite(sigmas[i])) {
        throw std::invalid_argument("NoiseSpec: every sigma_i must be positive and finite");
      }
    }
    return NoiseSpec(std::move(sigmas));
  }

  bool is_homoskedastic() const { return std::holds_alternative<double>(rep_); }
  double sigma() const {
    if (!is_homoskedastic()) throw std::logic_error("NoiseSpec::sigma: heteroskedastic noise");
    return std::get<double>(rep_);
  }
  const Vec& sigmas() const {
    if (is_homoskedastic()) throw std::logic_error("NoiseSpec::sigmas: homoskedastic noise");
    return std::get<Vec>(rep_);
  }
  /// Standard deviation of coordinate i.
  double sd(Index i) const { return is_homoskedastic() ? sigma() : sigmas()[i]; }
  double variance(Index i) const {
    const double s = sd(i);
    return s * s;
  }
  /// Dimension fixed by a heteroskedastic spec, if any.
  std::optional<Index> fixed_dim() const {
    if (is_homoskedastic()) return std::nullopt;
    return sigmas().size();
  }

 private:
  explicit NoiseSpec(double s) : rep_(s) {}
  explicit NoiseSpec(Vec s) : rep_(std::move(s)) {}
  std::variant<double, Vec> rep_;
};

inline void require_dim(const Vec& y, Index n, const char* where) {
  if (y.size() != n) {
    throw std::invalid_argument(std::string(where) + ": dimension mismatch (expected " +
                                std::to_string(n) + ", got " + std::to_string(y.size()) + ")");
  }
}

/// Y ~ N(theta0, diag(sd^2)).
class GaussianModel {
 public:
  GaussianModel(Vec theta0, NoiseSpec noise) : theta0_(std::move(theta0)), noise_(std::move(noise)) {
    if (theta0_.size() < 1) throw std::invalid_argument("GaussianModel: n must be >= 1");
    if (auto d = noise_.fixed_dim(); d && *d != theta0_.size()) {
      throw std::invalid_argument("GaussianModel: sigma vector length differs from mean length");
    }
  }
  static GaussianModel homoskedastic(Vec theta0, double sigma) {
    return GaussianModel(std::move(theta0), NoiseSpec::homoskedastic(sigma));
  }
  static GaussianModel heteroskedastic(Vec theta0, Vec sigmas) {
    return GaussianModel(std::move(theta0), NoiseSpec::heteroskedastic(std::move(sigmas)));
  }

  Index dim() const { return theta0_.size(); }
  const Vec& theta0() const { return theta0_; }
  const NoiseSpec& noise() const { return noise_; }

 private:
  Vec theta0_;
  NoiseSpec noise_;
};

/// The set S of admissible tuning values.
class TuningDomain {
 public:
  /// [lo, hi]; hi = +inf admits Tuning::infinity().
  static TuningDomain interval(double lo, double hi) {
    if (!(lo >= 0.0) || !(hi >= lo) || std::isnan(hi)) {
      throw std::invalid_argument("TuningDomain::interval: need 0 <= lo <= hi");
    }
    TuningDomain d;
    d.continuous_ = true;
    d.lo_ = lo;
    d.hi_ = hi;
    return d;
  }
  static TuningDomain discrete(std::vector<std::string> labels) {
    if (labels.empty()) throw std::invalid_argument("TuningDomain::discrete: empty label set");
    for (std::size_t i = 0; i < labels.size(); ++i) {
      for (std::size_t j = i + 1; j < labels.size(); ++j) {
        if (labels[i] == labels[j]) {
          throw std::invalid_argument("TuningDomain::discrete: duplicate label " + labels[i]);
        }
      }
    }
    TuningDomain d;
    d.continuous_ = false;
    d.labels_ = std::move(labels);
    return d;
  }

  bool is_continuous() const { return continuous_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }

  bool contains(const Tuning& s) const {
    if (continuous_) {
      if (s.is_label()) return false;
      if (s.is_infinite()) return std::isinf(hi_);
      return s.scalar() >= lo_ && s.scalar() <= hi_;
    }
    return s.is_label() && s.index() < labels_.size();
  }

  std::string describe(const Tuning& s) const {
    if (!continuous_ && s.is_label() && s.index() < labels_.size()) return labels_[s.index()];
    return s.to_string();
  }

 private:
  TuningDomain() = default;
  bool continuous_ = true;
  double lo_ = 0.0;
  double hi_ = kInf;
  std::vector<std::string> labels_;
};

/// Result of SURE minimization at one data vector.
struct TunedFit {
  Tuning s_hat = Tuning::value(0.0);
  Vec theta_hat;
  double sure_min = 0.0;
  double naive_df_at_shat = 0.0;
  bool multimodal = false;  // set by numeric minimizers that saw several local minima
};

enum class EdfMethod {
  monte_carlo,
  analytic_unbiased,
  implicit_diff,
  bootstrap_parametric,
  bootstrap_bigmodel,
  bootstrap_residual,
  closed_form
};

inline const char* to_string(EdfMethod m) {
  switch (m) {
    case EdfMethod::monte_carlo: return "monte_carlo";
    case EdfMethod::analytic_unbiased: return "analytic_unbiased";
    case EdfMethod::implicit_diff: return "implicit_diff";
    case EdfMethod::bootstrap_parametric: return "bootstrap_parametric";
    case EdfMethod::bootstrap_bigmodel: return "bootstrap_bigmodel";
    case EdfMethod::bootstrap_residual: return "bootstrap_residual";
    case EdfMethod::closed_form: return "closed_form";
  }
  return "?";
}

/// An excess-df estimate. std_error is 0 for closed forms and single-realization analytic values.
struct EdfReport {
  EdfMethod method = EdfMethod::closed_form;
  double value = 0.0;
  double std_error = 0.0;
  long reps = 0;
};

/// Mean and standard error of a Monte Carlo average.
struct McEstimate {
  double mean = 0.0;
  double std_error = 0.0;
  long reps = 0;
};

/**
 * A tunable family {theta_s : s in S} with an unbiased df estimate for each
 * fixed s and an exact (or documented numeric) SURE minimizer.
 */
template <class F>
concept EstimatorFamily = requires(const F& f, const Tuning& s, const Vec& y) {
  { f.dim() } -> std::convertible_to<Index>;
  { f.noise() } -> std::convertible_to<const NoiseSpec&>;
  { f.domain() } -> std::convertible_to<TuningDomain>;
  { f.estimate(s, y) } -> std::convertible_to<Vec>;
  { f.naive_df(s, y) } -> std::convertible_to<double>;
  { f.tune(y) } -> std::convertible_to<TunedFit>;
};

/// Noise-scaled squared norm: ||r||^2 (homoskedastic) or sum r_i^2 / sigma_i^2.
inline double scaled_rss(const NoiseSpec& noise, const Vec& r) {
  if (noise.is_homoskedastic()) return r.squaredNorm();
  return (r.array() / noise.sigmas().array()).square().sum();
}

/// Optimism multiplier: 2 sigma^2 (homoskedastic) or 2 (heteroskedastic, already scaled).
inline double optimism_scale(const NoiseSpec& noise) {
  if (noise.is_homoskedastic()) return 2.0 * noise.sigma() * noise.sigma();
  return 2.0;
}

/// SURE from its pieces, given a precomputed estimate and df.
inline double sure_from_parts(const NoiseSpec& noise, const Vec& y, const Vec& theta, double df) {
  return scaled_rss(noise, y - theta) + optimism_scale(noise) * df;
}

/**
 * SURE at tuning value s:
 *   ||Y - theta_s(Y)||^2 + 2 sigma^2 df_s(Y)                (homoskedastic)
 *   sum (Y_i - theta_s,i(Y))^2 / sigma_i^2 + 2 df_s(Y)       (heteroskedastic)
 */
template <EstimatorFamily F>
double sure(const F& family, const Tuning& s, const Vec& y) {
  require_dim(y, family.dim(), "sure");
  if (!family.domain().contains(s)) {
    throw std::domain_error("sure: tuning value " + s.to_string() + " outside family domain");
  }
  return sure_from_parts(family.noise(), y, family.estimate(s, y), family.naive_df(s, y));
}

template <EstimatorFamily F>
TunedFit tune_by_sure(const F& family, const Vec& y) {
  require_dim(y, family.dim(), "tune_by_sure");
  return family.tune(y);
}

/// The SURE-tuned rule Y -> theta_{s_hat(Y)}(Y) as a callable.
template <EstimatorFamily F>
auto tuned_rule(const F& family) {
  return [&family](const Vec& y) { return family.tune(y).theta_hat; };
}

/// The fixed-s rule Y -> theta_s(Y).
template <EstimatorFamily F>
auto fixed_rule(const F& family, Tuning s) {
  return [&family, s](const Vec& y) { return family.estimate(s, y); };
}

inline double std_normal_pdf(double x) {
  return 0.3989422804014327 * std::exp(-0.5 * x * x);
}
inline double std_normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace suretune
