#pragma once

// Simulation harness: outer Monte Carlo over Y for each (n, mean setting),
// recording df, excess df and error estimates as long-format CSV rows.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "bootstrap_edf.hpp"
#include "core.hpp"
#include "parallel.hpp"
#include "shrinkage.hpp"
#include "soft_threshold.hpp"
#include "stein_edf.hpp"
#include "subset_reg.hpp"

namespace suretune {

/// theta_hat = Y with no tuning; its excess df is 0.
class IdentityFamily {
 public:
  IdentityFamily(Index n, double sigma)
      : n_(n), noise_(NoiseSpec::homoskedastic(sigma)), domain_(TuningDomain::interval(0.0, 0.0)) {
    if (n < 1) throw std::invalid_argument("IdentityFamily: n must be >= 1");
  }
  Index dim() const { return n_; }
  const NoiseSpec& noise() const { return noise_; }
  TuningDomain domain() const { return domain_; }
  Vec estimate(const Tuning&, const Vec& y) const { return y; }
  double naive_df(const Tuning&, const Vec&) const { return static_cast<double>(n_); }
  TunedFit tune(const Vec& y) const {
    require_dim(y, n_, "IdentityFamily::tune");
    TunedFit f;
    f.theta_hat = y;
    f.naive_df_at_shat = static_cast<double>(n_);
    f.sure_min = sure(*this, f.s_hat, y);
    return f;
  }

 private:
  Index n_;
  NoiseSpec noise_;
  TuningDomain domain_;
};

inline const std::vector<std::string>& registered_families() {
  static const std::vector<std::string> names = {"shrink-means", "soft-threshold", "nested-chain", "identity"};
  return names;
}

inline const std::vector<std::string>& registered_settings() {
  static const std::vector<std::string> names = {"null", "weak_sparsity", "strong_sparsity", "custom"};
  return names;
}

namespace detail {

inline std::string join(const std::vector<std::string>& v) {
  std::string out;
  for (const auto& s : v) out += (out.empty() ? "" : ", ") + s;
  return out;
}

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

template <class T>
bool parse_number(const std::string& s, T& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  const auto r = std::from_chars(b, e, out);
  return r.ec == std::errc() && r.ptr == e && !s.empty();
}

}  // namespace detail

/// round(exp(linspace(log lo, log hi, k))), duplicates dropped.
inline std::vector<long> log_spaced_sizes(long lo, long hi, long k) {
  if (lo < 1 || hi < lo || k < 1) throw std::invalid_argument("log_spaced_sizes: need 1 <= lo <= hi, k >= 1");
  std::vector<long> out;
  for (long i = 0; i < k; ++i) {
    const double t = k == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(k - 1);
    const long v = std::lround(std::exp(std::log(double(lo)) + t * (std::log(double(hi)) - std::log(double(lo)))));
    if (out.empty() || out.back() != v) out.push_back(v);
  }
  return out;
}

/// Mean vector for a named setting.
inline Vec setting_theta(const std::string& setting, long n, const std::vector<double>& custom = {}) {
  Vec t = Vec::Zero(n);
  if (setting == "null") return t;
  if (setting == "weak_sparsity") {
    for (long i = 0; i < n; ++i) t[i] = 4.0 / std::sqrt(static_cast<double>(i + 1));
    return t;
  }
  if (setting == "strong_sparsity") {
    const long k = std::min<long>(n, static_cast<long>(std::floor(std::log(static_cast<double>(n)))));
    for (long i = 0; i < k; ++i) t[i] = 4.0;
    return t;
  }
  if (setting == "custom") {
    if (static_cast<long>(custom.size()) != n) {
      throw std::invalid_argument("setting_theta: custom_theta has " + std::to_string(custom.size()) +
                                  " entries, n = " + std::to_string(n));
    }
    for (long i = 0; i < n; ++i) t[i] = custom[static_cast<std::size_t>(i)];
    return t;
  }
  throw std::invalid_argument("unknown setting '" + setting + "'; known: " + detail::join(registered_settings()));
}

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, long line, const std::string& msg)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + msg), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

struct SimSpec {
  std::string family = "shrink-means";
  long p = 5;  // nested-chain: number of columns (capped at n)
  std::vector<std::string> settings = {"null"};
  std::vector<double> custom_theta;
  std::vector<long> sample_sizes = {10, 50, 200};
  double sigma = 1.0;
  long outer_reps = 1000;
  long bootstrap_reps = 200;  // 0 disables the bootstrap rows
  BootstrapSampler bootstrap_sampler = BootstrapSampler::parametric;
  double bootstrap_c = 1.0;
  std::uint64_t seed = 1;
  std::string output;

  /// 10 log-spaced n from 10 to 5000, 5000 reps, B = 1000.
  static SimSpec full_scale(const std::string& family) {
    SimSpec s;
    s.family = family;
    s.sample_sizes = log_spaced_sizes(10, 5000, 10);
    s.outer_reps = 5000;
    s.bootstrap_reps = 1000;
    s.settings = {"null", family == "soft-threshold" ? "strong_sparsity" : "weak_sparsity"};
    return s;
  }

  void validate() const {
    const auto& fams = registered_families();
    if (std::find(fams.begin(), fams.end(), family) == fams.end()) {
      throw std::invalid_argument("unknown family '" + family + "'; registered families: " + detail::join(fams));
    }
    if (settings.empty()) throw std::invalid_argument("SimSpec: no settings");
    for (const auto& s : settings) {
      const auto& known = registered_settings();
      if (std::find(known.begin(), known.end(), s) == known.end()) {
        throw std::invalid_argument("unknown setting '" + s + "'; known: " + detail::join(known));
      }
      if (s == "custom") {
        for (long n : sample_sizes) {
          if (static_cast<long>(custom_theta.size()) != n) {
            throw std::invalid_argument("SimSpec: custom_theta length must equal every sample size");
          }
        }
      }
    }
    if (sample_sizes.empty()) throw std::invalid_argument("SimSpec: no sample sizes");
    for (long n : sample_sizes) {
      if (n < 1) throw std::invalid_argument("SimSpec: sample sizes must be positive");
    }
    if (p < 1) throw std::invalid_argument("SimSpec: p must be >= 1");
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw std::invalid_argument("SimSpec: sigma must be positive");
    if (outer_reps < 2) throw std::invalid_argument("SimSpec: outer_reps must be >= 2");
    if (bootstrap_reps != 0) bootstrap_config(0).validate();
  }

  BootstrapConfig bootstrap_config(std::uint64_t s) const {
    BootstrapConfig c;
    c.B = bootstrap_reps;
    c.sampler = bootstrap_sampler;
    c.c = bootstrap_c;
    c.seed = s;
    c.threads = 1;
    return c;
  }
};

inline std::optional<BootstrapSampler> parse_sampler(const std::string& s) {
  for (auto v : {BootstrapSampler::parametric, BootstrapSampler::bigmodel, BootstrapSampler::residual}) {
    if (s == to_string(v)) return v;
  }
  return std::nullopt;
}

/**
 * Flat key = value lines; '#' starts a comment. Keys are the SimSpec field
 * names. sample_sizes takes a comma list or log:lo:hi:k.
 */
inline SimSpec parse_sim_config(std::istream& in, const std::string& source = "config") {
  SimSpec spec;
  std::map<std::string, long> seen;
  std::string raw;
  long line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const auto hash = raw.find('#');
    const std::string text = detail::trim(hash == std::string::npos ? raw : raw.substr(0, hash));
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, "expected key = value");
    const std::string key = detail::trim(text.substr(0, eq));
    const std::string val = detail::trim(text.substr(eq + 1));
    if (key.empty()) throw ConfigError(source, line, "missing key");
    if (val.empty()) throw ConfigError(source, line, "missing value for '" + key + "'");
    if (auto it = seen.find(key); it != seen.end()) {
      throw ConfigError(source, line, "duplicate key '" + key + "' (first set on line " + std::to_string(it->second) + ")");
    }
    seen[key] = line;
    auto bad = [&](const std::string& what) { return ConfigError(source, line, "bad value for '" + key + "': " + what); };
    auto as_long = [&](const std::string& s) {
      long v = 0;
      if (!detail::parse_number(s, v)) throw bad("expected an integer, got '" + s + "'");
      return v;
    };
    auto as_double = [&](const std::string& s) {
      double v = 0;
      if (!detail::parse_number(s, v)) throw bad("expected a number, got '" + s + "'");
      return v;
    };
    if (key == "family") {
      spec.family = val;
    } else if (key == "p") {
      spec.p = as_long(val);
    } else if (key == "settings") {
      spec.settings = detail::split(val, ',');
    } else if (key == "custom_theta") {
      spec.custom_theta.clear();
      for (const auto& t : detail::split(val, ',')) spec.custom_theta.push_back(as_double(t));
    } else if (key == "sample_sizes") {
      spec.sample_sizes.clear();
      if (val.rfind("log:", 0) == 0) {
        const auto parts = detail::split(val.substr(4), ':');
        if (parts.size() != 3) throw bad("expected log:lo:hi:k");
        try {
          spec.sample_sizes = log_spaced_sizes(as_long(parts[0]), as_long(parts[1]), as_long(parts[2]));
        } catch (const std::invalid_argument& e) {
          throw bad(e.what());
        }
      } else {
        for (const auto& t : detail::split(val, ',')) spec.sample_sizes.push_back(as_long(t));
      }
    } else if (key == "sigma") {
      spec.sigma = as_double(val);
    } else if (key == "outer_reps") {
      spec.outer_reps = as_long(val);
    } else if (key == "bootstrap_reps") {
      spec.bootstrap_reps = as_long(val);
    } else if (key == "bootstrap_sampler") {
      const auto s = parse_sampler(val);
      if (!s) throw bad("expected parametric, bigmodel or residual");
      spec.bootstrap_sampler = *s;
    } else if (key == "bootstrap_c") {
      spec.bootstrap_c = as_double(val);
    } else if (key == "seed") {
      std::uint64_t v = 0;
      if (!detail::parse_number(val, v)) throw bad("expected a nonnegative integer");
      spec.seed = v;
    } else if (key == "output") {
      spec.output = val;
    } else {
      throw ConfigError(source, line, "unknown key '" + key + "'");
    }
    if (key == "family" || key == "settings") {
      // checked on their own line; cross-field checks run at the end
      SimSpec probe;
      probe.family = spec.family;
      probe.settings = spec.settings;
      probe.custom_theta.clear();
      for (auto& st : probe.settings) {
        if (st == "custom") st = "null";
      }
      try {
        probe.validate();
      } catch (const std::invalid_argument& e) {
        throw bad(e.what());
      }
    }
    if (key == "p" && spec.p < 1) throw bad("must be >= 1");
    if (key == "sigma" && !(spec.sigma > 0.0 && std::isfinite(spec.sigma))) throw bad("must be positive");
    if (key == "outer_reps" && spec.outer_reps < 2) throw bad("must be >= 2");
    if (key == "bootstrap_reps" && (spec.bootstrap_reps < 0 || spec.bootstrap_reps == 1)) {
      throw bad("must be 0 (off) or >= 2");
    }
    if (key == "bootstrap_c" && !(spec.bootstrap_c > 0.0 && spec.bootstrap_c <= 1.0)) throw bad("must lie in (0, 1]");
    if (key == "sample_sizes") {
      for (long n : spec.sample_sizes) {
        if (n < 1) throw bad("sample sizes must be positive");
      }
    }
  }
  try {
    spec.validate();
  } catch (const std::invalid_argument& e) {
    const auto it = seen.find("custom_theta");
    throw ConfigError(source, it == seen.end() ? line : it->second, e.what());
  }
  return spec;
}

/// One CSV row. A missing estimate marks a method not available for the family.
struct SimRow {
  long n = 0;
  std::string setting;
  std::string method;
  std::string quantity;
  std::optional<McEstimate> estimate;
};

using SimFamily = std::variant<ShrinkMeansFamily, SoftThreshFamily, SubsetRegressionFamily, IdentityFamily>;

inline SimFamily make_sim_family(const SimSpec& spec, long n) {
  if (spec.family == "shrink-means") return ShrinkMeansFamily(n, spec.sigma);
  if (spec.family == "soft-threshold") return SoftThreshFamily(n, spec.sigma);
  if (spec.family == "identity") return IdentityFamily(n, spec.sigma);
  if (spec.family == "nested-chain") {
    const long p = std::min(spec.p, n);
    Mat x = Mat::Zero(n, p);
    x.topRows(p).setIdentity();
    return SubsetRegressionFamily(make_full_chain(x), spec.sigma);
  }
  throw std::invalid_argument("unknown family '" + spec.family + "'; registered families: " +
                              detail::join(registered_families()));
}

namespace detail {

enum SimCol {
  c_mc_edf,
  c_mc_df,
  c_naive_df,
  c_unbiased_edf,
  c_implicit_edf,
  c_boot_edf,
  c_boot_df,
  c_boot_naive_df,
  c_observed_excess,
  c_sure_min,
  c_corrected_err,
  c_unbiased_err,
  c_test_err,
  c_unbiased_df,
  c_count
};

}  // namespace detail

/**
 * For each n and setting, outer reps draw Y and an independent Y* from
 * per-rep streams keyed by (seed, n index, setting index, rep), so the output
 * does not depend on the thread count.
 */
inline std::vector<SimRow> run_simulation(const SimSpec& spec, unsigned threads = 0) {
  using namespace detail;
  spec.validate();
  const bool shrink = spec.family == "shrink-means";
  const bool boot = spec.bootstrap_reps > 0;
  const double s2 = spec.sigma * spec.sigma;
  std::vector<SimRow> rows;
  for (std::size_t ni = 0; ni < spec.sample_sizes.size(); ++ni) {
    const long n = spec.sample_sizes[ni];
    const SimFamily family = make_sim_family(spec, n);
    for (std::size_t si = 0; si < spec.settings.size(); ++si) {
      const std::string& setting = spec.settings[si];
      const auto model = GaussianModel::homoskedastic(setting_theta(setting, n, spec.custom_theta), spec.sigma);
      Mat table = Mat::Constant(spec.outer_reps, c_count, std::nan(""));
      parallel_for(spec.outer_reps, threads, [&](long r) {
        const auto key = [&](std::uint64_t k) {
          return make_stream(spec.seed, {ni, si, static_cast<std::uint64_t>(r), k});
        };
        auto ry = key(0);
        auto rs = key(1);
        const Vec y = draw(model, ry);
        const Vec ystar = draw(model, rs);
        auto row = table.row(r);
        std::visit(
            [&](const auto& fam) {
              const TunedFit fit = fam.tune(y);
              const double cov = (fit.theta_hat.dot(y - model.theta0())) / s2;
              const double test = (ystar - fit.theta_hat).squaredNorm();
              row[c_mc_df] = cov;
              row[c_naive_df] = fit.naive_df_at_shat;
              row[c_mc_edf] = cov - fit.naive_df_at_shat;
              row[c_sure_min] = fit.sure_min;
              row[c_test_err] = test;
              row[c_observed_excess] = (test - fit.sure_min) / (2.0 * s2);
              if (shrink) {
                const double e = edf_unbiased_shrink(fit);
                row[c_unbiased_edf] = e;
                row[c_unbiased_df] = fit.naive_df_at_shat + e;
                row[c_unbiased_err] = fit.sure_min + 2.0 * s2 * e;
                // theta_hat is locally constant where s_hat is infinite
                row[c_implicit_edf] = fit.s_hat.is_infinite()
                                          ? 0.0
                                          : edf_implicit_diff(means_shrink_hooks(spec.sigma), y, fit.s_hat.scalar());
              }
              if (boot) {
                auto rb = key(2);
                const auto run = bootstrap_run(fam, y, spec.bootstrap_config(rb()));
                row[c_boot_edf] = run.edf.mean;
                row[c_boot_df] = run.df.mean;
                row[c_boot_naive_df] = run.naive_df.mean;
                row[c_corrected_err] = fit.sure_min + 2.0 * s2 * run.edf.mean;
              }
            },
            family);
      });
      const auto est = column_estimates(table);
      auto add = [&](const char* method, const char* quantity, int col, bool available, double scale = 1.0) {
        SimRow row{n, setting, method, quantity, std::nullopt};
        if (available) {
          McEstimate e = est[static_cast<std::size_t>(col)];
          e.mean *= scale;
          e.std_error *= scale;
          row.estimate = e;
        }
        rows.push_back(std::move(row));
      };
      add("monte_carlo", "edf", c_mc_edf, true);
      add("unbiased", "edf", c_unbiased_edf, shrink);
      add("implicit_diff", "edf", c_implicit_edf, shrink);
      add("bootstrap", "edf", c_boot_edf, boot);
      add("observed_excess_optimism", "edf", c_observed_excess, true);
      add("monte_carlo", "df", c_mc_df, true);
      add("naive", "df", c_naive_df, true);
      add("unbiased", "df", c_unbiased_df, shrink);
      add("bootstrap", "df", c_boot_df, boot);
      add("naive_bootstrap", "df", c_boot_naive_df, boot);
      for (const auto& [quantity, scale] :
           {std::pair<const char*, double>{"error", 1.0}, {"error_per_n", 1.0 / static_cast<double>(n)}}) {
        add("naive", quantity, c_sure_min, true, scale);
        add("corrected", quantity, c_corrected_err, boot, scale);
        add("unbiased", quantity, c_unbiased_err, shrink, scale);
        add("test", quantity, c_test_err, true, scale);
      }
    }
  }
  return rows;
}

/// %.12g, independent of the global locale.
inline std::string format_number(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 12);
  return std::string(buf, r.ptr);
}

inline void write_csv(const std::vector<SimRow>& rows, std::ostream& out) {
  out << "n,setting,method,quantity,mean,std_error,reps\n";
  for (const auto& r : rows) {
    out << r.n << ',' << r.setting << ',' << r.method << ',' << r.quantity << ',';
    if (r.estimate) {
      out << format_number(r.estimate->mean) << ',' << format_number(r.estimate->std_error) << ','
          << r.estimate->reps << '\n';
    } else {
      out << "NA,NA,0\n";
    }
  }
}

}  // namespace suretune
