#include <algorithm>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <CLI11.hpp>

#include <suretune/suretune.hpp>

using namespace suretune;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numbers separated by commas, semicolons or whitespace, one row per line.
// Lines with no numeric token (a header) are skipped.
Mat read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    for (char& ch : line) {
      if (ch == ',' || ch == ';' || ch == '\t') ch = ' ';
    }
    std::istringstream ls(line);
    std::vector<double> row;
    std::string tok;
    bool any_text = false;
    while (ls >> tok) {
      double v = 0.0;
      if (detail::parse_number(tok, v)) {
        row.push_back(v);
      } else {
        any_text = true;
      }
    }
    if (row.empty()) continue;
    if (any_text) throw UsageError(path + ":" + std::to_string(lineno) + ": non-numeric entry");
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw UsageError(path + ":" + std::to_string(lineno) + ": expected " + std::to_string(rows.front().size()) +
                       " columns");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw UsageError("'" + path + "' holds no numbers");
  Mat m(static_cast<Index>(rows.size()), static_cast<Index>(rows.front().size()));
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return m;
}

Vec read_vector(const std::string& path) {
  const Mat m = read_table(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw UsageError("'" + path + "' must hold a single row or column");
}

struct Output {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit Output(const std::string& path) {
    if (path.empty()) return;
    file.open(path);
    if (!file) throw UsageError("cannot write '" + path + "'");
    os = &file;
  }
  std::ostream& operator*() { return *os; }
};

using CliFamily = std::variant<ShrinkMeansFamily, SoftThreshFamily, SubsetRegressionFamily, IdentityFamily,
                               ShrinkRegressionFamily, HeteroShrinkFamily>;

const std::vector<std::string> kCliFamilies = {"shrink-means", "soft-threshold",    "nested-chain", "all-subsets",
                                               "identity",     "shrink-regression", "hetero-shrink"};

struct FamilyArgs {
  std::string family = "shrink-means";
  double sigma = 1.0;
  std::string design;
  std::string sigmas;
  long p = 5;
};

CliFamily make_family(const FamilyArgs& a, Index n) {
  auto need_design = [&]() {
    if (a.design.empty()) throw UsageError("family '" + a.family + "' needs --design");
    Mat x = read_table(a.design);
    if (x.rows() != n) throw UsageError("--design has " + std::to_string(x.rows()) + " rows, data has " + std::to_string(n));
    return x;
  };
  if (a.family == "shrink-means") return ShrinkMeansFamily(n, a.sigma);
  if (a.family == "soft-threshold") return SoftThreshFamily(n, a.sigma);
  if (a.family == "identity") return IdentityFamily(n, a.sigma);
  if (a.family == "shrink-regression") return ShrinkRegressionFamily(need_design(), a.sigma);
  if (a.family == "all-subsets") return SubsetRegressionFamily(SubsetCollection::all_subsets(need_design()), a.sigma);
  if (a.family == "nested-chain") {
    if (!a.design.empty()) return SubsetRegressionFamily(make_full_chain(need_design()), a.sigma);
    const long p = std::min<long>(a.p, n);
    Mat x = Mat::Zero(n, p);
    x.topRows(p).setIdentity();
    return SubsetRegressionFamily(make_full_chain(x), a.sigma);
  }
  if (a.family == "hetero-shrink") {
    if (a.sigmas.empty()) throw UsageError("family 'hetero-shrink' needs --sigmas");
    Vec s = read_vector(a.sigmas);
    if (s.size() != n) throw UsageError("--sigmas has " + std::to_string(s.size()) + " entries, data has " + std::to_string(n));
    return HeteroShrinkFamily(s);
  }
  throw UsageError("unknown family '" + a.family + "'; registered families: " + detail::join(kCliFamilies));
}

void require_known_family(const std::string& name) {
  if (std::find(kCliFamilies.begin(), kCliFamilies.end(), name) == kCliFamilies.end()) {
    throw UsageError("unknown family '" + name + "'; registered families: " + detail::join(kCliFamilies));
  }
}

void add_family_options(CLI::App* cmd, FamilyArgs& a) {
  cmd->add_option("--family", a.family, "Estimator family: " + detail::join(kCliFamilies));
  cmd->add_option("--sigma", a.sigma, "Noise standard deviation")->check(CLI::PositiveNumber);
  cmd->add_option("--design", a.design, "Design matrix file (regression families)");
  cmd->add_option("--sigmas", a.sigmas, "Per-coordinate noise sd file (hetero-shrink)");
  cmd->add_option("--p", a.p, "Columns of the default identity chain (nested-chain)")->check(CLI::PositiveNumber);
}

std::string fmt(double v) { return format_number(v); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SURE tuning, excess degrees of freedom and bounds"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 1;
  unsigned threads = 0;
  std::string out_path;
  auto* seed_opt = app.add_option("--seed", seed, "Random seed");
  app.add_option("--threads", threads, "Worker threads (0 = hardware)");
  app.add_option("--out", out_path, "Output file (default stdout)");

  // tune
  FamilyArgs tune_fam;
  std::string tune_data;
  auto* tune = app.add_subcommand("tune", "SURE-tune a family on data");
  add_family_options(tune, tune_fam);
  tune->add_option("--data", tune_data, "Observations, one row or one column")->required();

  // edf
  FamilyArgs edf_fam;
  std::string edf_data, edf_method = "monte_carlo", edf_setting = "null", edf_sampler = "parametric";
  long edf_n = 50, edf_reps = 2000, edf_b = 1000;
  double edf_c = 1.0;
  auto* edf = app.add_subcommand("edf", "Estimate excess degrees of freedom");
  add_family_options(edf, edf_fam);
  edf->add_option("--method", edf_method, "monte_carlo, unbiased, implicit_diff, bootstrap or bootstrap_df");
  edf->add_option("--data", edf_data, "Observations (default: one draw from --setting)");
  edf->add_option("--n", edf_n, "Dimension when no data is given")->check(CLI::PositiveNumber);
  edf->add_option("--setting", edf_setting, "Mean setting: " + detail::join(registered_settings()));
  edf->add_option("--reps", edf_reps, "Monte Carlo repetitions")->check(CLI::Range(2L, 1L << 40));
  edf->add_option("--B", edf_b, "Bootstrap replications")->check(CLI::Range(2L, 1L << 40));
  edf->add_option("--sampler", edf_sampler, "parametric, bigmodel or residual");
  edf->add_option("--c", edf_c, "Big-model variance multiplier in (0, 1]");

  // simulate
  std::string sim_config;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation from a config file");
  simulate->add_option("--config", sim_config, "key = value config file")->required();

  // bounds
  auto* bounds = app.add_subcommand("bounds", "Evaluate a bound");
  bounds->require_subcommand(1);
  long b_p = 10, b_N = 1000, b_dirs = kSurfaceDirections;
  double b_delta = 0.9, b_radius = 1.0;
  std::vector<long> b_sizes;
  std::vector<double> b_vec;
  auto* b_nested = bounds->add_subcommand("nested-null-edf", "Null-case bound for nested chains");
  b_nested->add_option("--p", b_p, "Largest model size")->check(CLI::PositiveNumber);
  auto* b_app = bounds->add_subcommand("nested-null-stirling", "Stirling chain for the nested null constant");
  b_app->add_option("--N", b_N, "Terms summed before the geometric tail")->check(CLI::PositiveNumber);
  auto* b_chi = bounds->add_subcommand("chi-sq-max", "Bound on E max (W_s - p_s)");
  b_chi->add_option("--sizes", b_sizes, "Subset sizes")->delimiter(',')->required();
  b_chi->add_option("--delta", b_delta, "delta in [0, 1)");
  auto* b_simple = bounds->add_subcommand("edf-simplified", "log|S| + p_max form of the subset bound");
  b_simple->add_option("--sizes", b_sizes, "Subset sizes")->delimiter(',')->required();
  b_simple->add_option("--delta", b_delta, "delta in [0, 1)");
  auto* b_area = bounds->add_subcommand("surface-area", "Gaussian surface area of a ball");
  b_area->add_option("--center", b_vec, "Ball center")->delimiter(',')->required();
  b_area->add_option("--radius", b_radius, "Ball radius")->check(CLI::PositiveNumber);
  b_area->add_option("--directions", b_dirs, "Sphere directions for off-center balls");
  auto* b_gas = bounds->add_subcommand("gas-stations", "Valid circular rotation of w (sum 2d)");
  b_gas->add_option("--w", b_vec, "Nonnegative entries summing to 2d")->delimiter(',')->required();
  auto* b_gen = bounds->add_subcommand("general-theta", "Nested-chain bounds for a general mean");
  b_gen->add_option("--mu", b_vec, "Gram-Schmidt coordinates V^T theta0 / sigma")->delimiter(',')->required();
  b_gen->add_option("--directions", b_dirs, "Sphere directions per dimension");
  auto* b_best = bounds->add_subcommand("best-subset-constant", "Constant in the best-subset df bound");

  // selfcheck
  std::vector<int> criteria;
  auto* selfcheck = app.add_subcommand("selfcheck", "Run the acceptance suite");
  selfcheck->add_option("--criteria", criteria, "Only these criteria")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*tune) {
      require_known_family(tune_fam.family);
      const Vec y = read_vector(tune_data);
      const CliFamily fam = make_family(tune_fam, y.size());
      std::visit(
          [&](const auto& f) {
            const TunedFit fit = f.tune(y);
            std::cout << "family = " << tune_fam.family << "\n"
                      << "n = " << y.size() << "\n"
                      << "s_hat = " << f.domain().describe(fit.s_hat) << "\n"
                      << "sure_min = " << fmt(fit.sure_min) << "\n"
                      << "naive_df = " << fmt(fit.naive_df_at_shat) << "\n"
                      << "theta_norm = " << fmt(fit.theta_hat.norm()) << "\n"
                      << "theta_nonzero = " << (fit.theta_hat.array() != 0.0).count() << "\n"
                      << "multimodal = " << (fit.multimodal ? "true" : "false") << "\n";
            if (!out_path.empty()) {
              Output out(out_path);
              *out << "i,y,theta_hat\n";
              for (Index i = 0; i < y.size(); ++i) *out << i + 1 << ',' << fmt(y[i]) << ',' << fmt(fit.theta_hat[i]) << '\n';
            }
          },
          fam);
      return 0;
    }

    if (*edf) {
      require_known_family(edf_fam.family);
      Vec y;
      GaussianModel model = GaussianModel::homoskedastic(Vec::Zero(1), 1.0);
      Index n = edf_n;
      if (!edf_data.empty()) {
        y = read_vector(edf_data);
        n = y.size();
      }
      const CliFamily fam = make_family(edf_fam, n);
      const Vec theta0 = setting_theta(edf_setting, n);
      std::visit([&](const auto& f) { model = GaussianModel(theta0, f.noise()); }, fam);
      if (y.size() == 0) {
        auto rng = make_stream(seed, {0xed});
        y = draw(model, rng);
      }
      EdfReport rep;
      std::visit(
          [&](const auto& f) {
            using F = std::decay_t<decltype(f)>;
            if (edf_method == "monte_carlo") {
              if (!edf_data.empty()) throw UsageError("monte_carlo uses the model from --setting, not --data");
              rep = mc_edf(f, model, edf_reps, seed, threads);
            } else if (edf_method == "unbiased" || edf_method == "implicit_diff") {
              if constexpr (std::is_same_v<F, ShrinkMeansFamily> || std::is_same_v<F, ShrinkRegressionFamily>) {
                const TunedFit fit = f.tune(y);
                double v = edf_unbiased_shrink(fit);
                if (edf_method == "implicit_diff" && !fit.s_hat.is_infinite()) {
                  if constexpr (std::is_same_v<F, ShrinkMeansFamily>) {
                    v = edf_implicit_diff(means_shrink_hooks(edf_fam.sigma), y, fit.s_hat.scalar());
                  } else {
                    v = edf_implicit_diff(regression_shrink_hooks(f.projector(), edf_fam.sigma), y, fit.s_hat.scalar());
                  }
                }
                rep = {edf_method == "unbiased" ? EdfMethod::analytic_unbiased : EdfMethod::implicit_diff, v, 0.0, 1};
              } else if constexpr (std::is_same_v<F, HeteroShrinkFamily>) {
                const TunedFit fit = f.tune(y);
                const double v = fit.s_hat.is_infinite() ? 0.0 : 0.5 * exopt_hetero_shrink(y, f.noise().sigmas(), fit.s_hat.scalar());
                rep = {EdfMethod::implicit_diff, v, 0.0, 1};
              } else {
                throw UsageError("method '" + edf_method + "' is not available for family '" + edf_fam.family + "'");
              }
            } else if (edf_method == "bootstrap" || edf_method == "bootstrap_df") {
              const auto smp = parse_sampler(edf_sampler);
              if (!smp) throw UsageError("unknown sampler '" + edf_sampler + "'");
              BootstrapConfig cfg;
              cfg.B = edf_b;
              cfg.sampler = *smp;
              cfg.c = edf_c;
              cfg.seed = seed;
              cfg.threads = threads;
              rep = edf_method == "bootstrap" ? bootstrap_edf(f, y, cfg) : bootstrap_df(f, y, cfg);
            } else {
              throw UsageError("unknown method '" + edf_method + "'");
            }
          },
          fam);
      Output out(out_path);
      *out << "family,method,value,std_error,reps\n"
           << edf_fam.family << ',' << edf_method << ',' << fmt(rep.value) << ',' << fmt(rep.std_error) << ','
           << rep.reps << '\n';
      return 0;
    }

    if (*simulate) {
      std::ifstream in(sim_config);
      if (!in) throw UsageError("cannot open '" + sim_config + "'");
      SimSpec spec = parse_sim_config(in, sim_config);
      if (seed_opt->count() > 0) spec.seed = seed;
      const std::string path = out_path.empty() ? spec.output : out_path;
      const auto rows = run_simulation(spec, threads);
      Output out(path);
      write_csv(rows, *out);
      return 0;
    }

    if (*bounds) {
      Output out(out_path);
      if (*b_nested) {
        const double v = nested_null_edf_bound(b_p);
        *out << "nested_null_edf_bound = " << fmt(v) << "\n"
             << "below_10 = " << (v < 10.0 ? "true" : "false") << "\n";
      } else if (*b_app) {
        const auto a = nested_null_stirling(b_N);
        *out << "sqrt_part = " << fmt(a.sqrt_part) << "\n"
             << "inv_sqrt_part = " << fmt(a.inv_sqrt_part) << "\n"
             << "total = " << fmt(a.total()) << "\n"
             << "below_10 = " << (a.total() < 10.0 ? "true" : "false") << "\n";
      } else if (*b_chi) {
        *out << "chi_sq_max_bound = " << fmt(chi_sq_max_bound({b_sizes, b_delta})) << "\n";
      } else if (*b_simple) {
        *out << "simplified = " << fmt(edf_upper_bound_simplified(b_sizes, b_delta)) << "\n"
             << "tight = " << fmt(edf_upper_bound_tight(b_sizes, b_delta)) << "\n";
      } else if (*b_area) {
        const Vec c = Eigen::Map<const Vec>(b_vec.data(), static_cast<Index>(b_vec.size()));
        const auto a = gaussian_surface_area_ball(c, b_radius, seed, b_dirs);
        *out << "surface_area = " << fmt(a.value) << "\n"
             << "std_error = " << fmt(a.std_error) << "\n"
             << "exact = " << (a.exact ? "true" : "false") << "\n";
      } else if (*b_gas) {
        const auto g = gas_stations_rotation(b_vec);
        *out << "index = " << g.index << "\n"
             << "multiplicity = " << g.multiplicity << "\n";
      } else if (*b_gen) {
        const Vec mu = Eigen::Map<const Vec>(b_vec.data(), static_cast<Index>(b_vec.size()));
        const auto g = general_theta_bound(mu, seed, b_dirs);
        const auto a = alternate_theta_bound(mu, seed, b_dirs);
        *out << "window_bound = " << fmt(g.value) << "\n"
             << "window_bound_std_error = " << fmt(g.std_error) << "\n"
             << "pair_bound = " << fmt(a.value) << "\n"
             << "pair_bound_std_error = " << fmt(a.std_error) << "\n"
             << "approximate = " << (g.approximate || a.approximate ? "true" : "false") << "\n"
             << "loose_cap = " << fmt(general_theta_loose_cap(mu.size())) << "\n";
      } else if (*b_best) {
        const auto k = best_subset_constant();
        *out << "constant = " << fmt(k.value) << "\n"
             << "delta = " << fmt(k.delta) << "\n"
             << "half = " << fmt(k.half()) << "\n";
      }
      return 0;
    }

    if (*selfcheck) {
      AcceptanceOptions opt;
      opt.seed = seed;
      opt.threads = threads;
      opt.only.insert(criteria.begin(), criteria.end());
      Output out(out_path);
      const auto results = run_acceptance(opt, &*out);
      return acceptance_ok(results) ? 0 : 1;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
