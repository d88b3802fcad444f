// freqchoice: estimate / simulate / effects / compare workflows over the
// weekly-frequency choice families.
//
// Exit codes: 0 success, 1 usage error, 2 data/spec/numeric error,
// 3 fit did not converge (artifacts are still written).

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "freqchoice/io.hpp"

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNoConvergence = 3;

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw freqchoice::DataError("cannot open '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

freqchoice::ojson parse_json_file(const std::string& path) {
  try {
    return freqchoice::ojson::parse(slurp(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw freqchoice::DataError("'" + path + "' is not valid JSON: " +
                                e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw freqchoice::DataError("cannot open '" + path +
                                        "' for writing");
  out << text;
  if (!out) throw freqchoice::DataError("failed writing '" + path + "'");
}

std::string file_stem(const std::string& path) {
  const auto slash = path.find_last_of("/\\");
  std::string name = slash == std::string::npos ? path : path.substr(slash + 1);
  const auto dot = name.find_last_of('.');
  if (dot != std::string::npos && dot > 0) name = name.substr(0, dot);
  return name;
}

freqchoice::Dataset load_csv(const std::string& path,
                             const freqchoice::ModelSpec& spec) {
  std::istringstream in(slurp(path));
  return freqchoice::load_dataset(in, spec);
}

struct EstimateArgs {
  std::string data_path;
  std::string spec_path;
  std::string init_path;
  std::string out_path;
  double null_ll = 0.0;
  bool has_null_ll = false;
  int starts = 1;
  std::uint64_t seed = 0;
};

int run_estimate(const EstimateArgs& args) {
  const freqchoice::ModelSpec spec =
      freqchoice::spec_from_json(parse_json_file(args.spec_path));
  const freqchoice::Dataset data = load_csv(args.data_path, spec);
  std::optional<freqchoice::ParamSet> init;
  if (!args.init_path.empty()) {
    init = freqchoice::params_from_json(parse_json_file(args.init_path));
  }
  freqchoice::EstimateOptions opt;
  opt.starts = args.starts;
  opt.seed = args.seed;
  if (args.has_null_ll) opt.null_ll = args.null_ll;

  const freqchoice::FitResult fit = freqchoice::fit(data, spec, init, opt);
  write_text_file(args.out_path, freqchoice::fit_to_json(fit).dump(2) + "\n");
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << freqchoice::family_name(fit.spec.family) << ": n=" << fit.n
            << " k=" << fit.k << " ll=" << fit.ll_convergence
            << " aic=" << fit.stats.aic
            << (fit.converged ? "" : " (NOT CONVERGED)") << "\n";
  if (!fit.converged) {
    std::cerr << "fit did not converge after " << fit.iterations
              << " iterations (gradient norm " << fit.gradient_norm << ")\n";
    return kExitNoConvergence;
  }
  return 0;
}

int run_simulate(const std::string& config_path, const std::string& out_path) {
  const freqchoice::SimulationConfig config =
      freqchoice::simulation_config_from_json(parse_json_file(config_path));
  const freqchoice::Dataset data = freqchoice::simulate(config);
  std::ostringstream out;
  freqchoice::write_dataset_csv(data, out);
  write_text_file(out_path, out.str());
  std::cout << "simulated " << data.n() << " observations ("
            << freqchoice::family_name(config.spec.family) << ")\n";
  return 0;
}

int run_effects(const std::string& fit_path, const std::string& data_path,
                const std::string& covariate, bool average,
                const std::string& out_path) {
  const freqchoice::FitResult fit =
      freqchoice::fit_from_json(parse_json_file(fit_path));
  const freqchoice::Dataset data = load_csv(data_path, fit.spec);

  // A dummy regressor additionally gets the unit 0 -> 1 contrast.
  bool binary = data.n() > 0;
  if (const auto col = data.column_index(covariate); binary && col) {
    for (const double v : data.column(*col)) {
      binary = binary && (v == 0.0 || v == 1.0);
    }
  } else {
    binary = false;
  }

  std::vector<freqchoice::EffectsTable> tables;
  if (average) {
    tables.push_back(freqchoice::average_marginal_effects(fit, data, covariate));
    if (binary) {
      tables.push_back(
          freqchoice::average_discrete_change(fit, data, covariate));
    }
  } else {
    if (!fit.converged) {
      std::cerr << "warning: effects evaluated at a non-converged fit\n";
    }
    if (data.n() == 0) {
      throw freqchoice::DataError("dataset has no observations");
    }
    for (std::size_t i = 0; i < data.n(); ++i) {
      const freqchoice::Observation obs = data.observation(i);
      tables.push_back(
          freqchoice::marginal_effects(fit.spec, fit.params, obs, covariate));
      if (binary) {
        tables.push_back(freqchoice::discrete_change_effects(
            fit.spec, fit.params, obs, covariate));
      }
    }
  }
  std::ostringstream out;
  freqchoice::write_effects_csv(tables, out);
  write_text_file(out_path, out.str());
  std::cout << "wrote " << tables.size() << " effects row"
            << (tables.size() == 1 ? "" : "s") << " for '" << covariate
            << "'\n";
  return 0;
}

int run_comparison(const std::vector<std::string>& fit_paths,
                   const std::string& out_path) {
  std::vector<freqchoice::FitResult> fits;
  std::vector<std::string> labels;
  for (const auto& path : fit_paths) {
    fits.push_back(freqchoice::fit_from_json(parse_json_file(path)));
    labels.push_back(file_stem(path));
  }
  const auto rows = freqchoice::run_compare(fits, labels);
  std::ostringstream out;
  freqchoice::write_comparison_csv(rows, out);
  write_text_file(out_path, out.str());
  std::cout << "best by AIC: " << rows.front().label << " (aic="
            << rows.front().aic << ")\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Maximum-likelihood toolkit for weekly-frequency choice "
               "models"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand(
      "estimate", "Fit a model spec to CSV data by maximum likelihood");
  estimate->add_option("--data", est.data_path, "Input CSV (freq + covariates)")
      ->required();
  estimate->add_option("--spec", est.spec_path, "Model spec JSON")->required();
  estimate->add_option("--init", est.init_path,
                       "Optional starting parameter JSON");
  CLI::Option* null_opt = estimate->add_option(
      "--null-ll", est.null_ll,
      "Externally supplied null log-likelihood for rho-squared");
  estimate->add_option("--starts", est.starts, "Number of optimizer starts")
      ->check(CLI::PositiveNumber);
  estimate->add_option("--seed", est.seed, "Seed for multi-start perturbation");
  estimate->add_option("--out", est.out_path, "Output fit JSON")->required();

  std::string sim_config, sim_out;
  CLI::App* simulate =
      app.add_subcommand("simulate", "Draw a synthetic dataset from a config");
  simulate->add_option("--config", sim_config, "Simulation config JSON")
      ->required();
  simulate->add_option("--out", sim_out, "Output CSV")->required();

  std::string eff_fit, eff_data, eff_cov, eff_out;
  bool eff_average = false;
  CLI::App* effects = app.add_subcommand(
      "effects", "Marginal effects of one covariate at a fitted model");
  effects->add_option("--fit", eff_fit, "Fit result JSON")->required();
  effects->add_option("--data", eff_data, "Evaluation dataset CSV")->required();
  effects->add_option("--covariate", eff_cov, "Covariate name")->required();
  effects->add_flag("--average", eff_average,
                    "Sample-average instead of per-observation rows");
  effects->add_option("--out", eff_out, "Output CSV")->required();

  std::vector<std::string> cmp_fits;
  std::string cmp_out;
  CLI::App* compare = app.add_subcommand(
      "compare", "Rank fitted models on one dataset by AIC/BIC/rho-squared");
  compare->add_option("fits", cmp_fits, "Fit result JSON files")
      ->required()
      ->expected(-1);
  compare->add_option("--out", cmp_out, "Output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  }

  try {
    if (*estimate) {
      est.has_null_ll = null_opt->count() > 0;
      return run_estimate(est);
    }
    if (*simulate) return run_simulate(sim_config, sim_out);
    if (*effects) {
      return run_effects(eff_fit, eff_data, eff_cov, eff_average, eff_out);
    }
    if (*compare) return run_comparison(cmp_fits, cmp_out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
