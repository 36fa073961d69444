// actugen command-line interface.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "actugen/augment.hpp"
#include "actugen/claims_sim.hpp"
#include "actugen/error.hpp"
#include "actugen/glm.hpp"
#include "actugen/metrics.hpp"
#include "actugen/mice.hpp"
#include "actugen/runner.hpp"
#include "actugen/surrogate.hpp"

using namespace actugen;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c, bool out_required = true) {
  cmd->add_option("--config", c.config, "JSON run configuration");
  cmd->add_option("--seed", c.seed, "master seed (overrides the config)");
  auto* o = cmd->add_option("--out", c.out, "output file or directory");
  if (out_required) o->required();
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : ExperimentConfig::from_file(c.config);
  if (c.seed) cfg.seed = *c.seed;
  return cfg;
}

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

Dataset load_or_surrogate(const std::string& path, const ExperimentConfig& cfg) {
  if (path.empty() || path == "surrogate") return surrogate_portfolio(cfg.surrogate_rows, SeedSchedule{cfg.seed}.surrogate());
  return load_portfolio(path, cfg.schema, CsvOptions{cfg.delimiter});
}

std::string coefficient_table(const FittedGLM& fit) {
  std::string out = "term,estimate,std_error\n";
  const auto se = fit.standard_errors();
  for (Eigen::Index j = 0; j < fit.beta.size(); ++j)
    out += fit.names[static_cast<std::size_t>(j)] + "," + num(fit.beta[j]) + "," + num(se[j]) + "\n";
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Synthetic insurance portfolio generation and evaluation"};
  app.require_subcommand(1);

  Common c_sur, c_sim, c_split, c_gen, c_fit, c_eval, c_aug, c_exp;

  auto* sur = app.add_subcommand("surrogate", "write the built-in surrogate portfolio");
  add_common(sur, c_sur);
  std::size_t sur_rows = kPortfolioRows;
  sur->add_option("--rows", sur_rows, "row count");

  auto* sim = app.add_subcommand("simulate", "replace the response with simulated claim counts");
  add_common(sim, c_sim);
  std::string sim_data, sim_scenario;
  sim->add_option("--data", sim_data, "portfolio CSV (default: surrogate)");
  sim->add_option("--scenario", sim_scenario, "linear | interaction");

  auto* spl = app.add_subcommand("split", "train/test split into <out>/train.csv and <out>/test.csv");
  add_common(spl, c_split);
  std::string split_data;
  std::optional<double> split_fraction;
  spl->add_option("--data", split_data, "portfolio CSV")->required();
  spl->add_option("--fraction", split_fraction, "training fraction");

  auto* gen = app.add_subcommand("generate", "generate a synthetic copy of a training set");
  add_common(gen, c_gen);
  std::string gen_data, gen_method = "mice";
  gen->add_option("--data", gen_data, "training CSV")->required();
  gen->add_option("--method", gen_method, "mice | mice_all_syn | mice_tabulator");

  auto* fit = app.add_subcommand("fit", "fit the Poisson GLM of a scenario structure");
  add_common(fit, c_fit);
  std::string fit_data, fit_scenario;
  bool fit_stepwise = false;
  fit->add_option("--data", fit_data, "CSV with response")->required();
  fit->add_option("--scenario", fit_scenario, "linear | interaction");
  fit->add_flag("--stepwise", fit_stepwise, "select terms by stepwise AIC over all covariates");

  auto* ev = app.add_subcommand("evaluate", "score synthetic CSVs against a training CSV");
  add_common(ev, c_eval);
  std::string ev_train, ev_scenario;
  std::vector<std::string> ev_syn;
  ev->add_option("--train", ev_train, "training CSV")->required();
  ev->add_option("--synthetic", ev_syn, "synthetic CSV(s)")->required();
  ev->add_option("--scenario", ev_scenario, "linear | interaction");

  auto* aug = app.add_subcommand("augment", "assemble training and synthetic parts for s = (t, L)");
  add_common(aug, c_aug);
  std::string aug_train, aug_syn;
  std::size_t aug_t = 1, aug_L = 0;
  std::optional<std::size_t> aug_parts;
  aug->add_option("--train", aug_train, "training CSV")->required();
  aug->add_option("--synthetic", aug_syn, "synthetic CSV")->required();
  aug->add_option("--t", aug_t, "include training rows (0 or 1)");
  aug->add_option("--L", aug_L, "synthetic parts to append");
  aug->add_option("--parts", aug_parts, "number of parts m");

  auto* exp = app.add_subcommand("experiment", "run a full experiment and write result tables");
  add_common(exp, c_exp, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sur) {
      const auto cfg = load_config(c_sur);
      write_csv(surrogate_portfolio(sur_rows, SeedSchedule{cfg.seed}.surrogate()), c_sur.out, CsvOptions{cfg.delimiter});
    } else if (*sim) {
      auto cfg = load_config(c_sim);
      if (!sim_scenario.empty()) cfg.scenario = parse_scenario_kind(sim_scenario);
      const Dataset ds = with_unit_exposure(load_or_surrogate(sim_data, cfg));
      const auto scenario = builtin_scenario(cfg.scenario, cfg.reading);
      const auto r = simulate_counts(ds, scenario, SeedSchedule{cfg.seed}.simulate());
      write_csv(ds.with_column(*ds.schema().response(), r.counts), c_sim.out, CsvOptions{cfg.delimiter});
      std::cout << "mean frequency " << num(r.mean_frequency) << "\n";
    } else if (*spl) {
      auto cfg = load_config(c_split);
      if (split_fraction) cfg.train_fraction = *split_fraction;
      const auto s = split_train_test(load_or_surrogate(split_data, cfg), cfg.train_fraction, SeedSchedule{cfg.seed}.split());
      std::filesystem::create_directories(c_split.out);
      write_csv(s.train, c_split.out + "/train.csv", CsvOptions{cfg.delimiter});
      write_csv(s.test, c_split.out + "/test.csv", CsvOptions{cfg.delimiter});
      std::cout << "train " << s.train.n_rows() << " test " << s.test.n_rows() << "\n";
    } else if (*gen) {
      const auto cfg = load_config(c_gen);
      const Dataset train = load_portfolio(gen_data, cfg.schema, CsvOptions{cfg.delimiter});
      AmputationPlan plan = AmputationPlan::defaults(parse_generator_kind(gen_method));
      plan.disjoint_rounds = cfg.tabulator_disjoint;
      const auto syn = generate_synthetic(train, plan, cfg.mice, SeedSchedule{cfg.seed}.replicate(to_string(plan.strategy), 1));
      write_csv(syn.data, c_gen.out, CsvOptions{cfg.delimiter});
    } else if (*fit) {
      auto cfg = load_config(c_fit);
      if (!fit_scenario.empty()) cfg.scenario = parse_scenario_kind(fit_scenario);
      const Dataset ds = load_portfolio(fit_data, cfg.schema, CsvOptions{cfg.delimiter});
      const auto scenario = builtin_scenario(cfg.scenario, cfg.reading);
      FittedGLM f;
      if (fit_stepwise) {
        const auto sw = stepwise_aic(ds, selection_scope(ds, scenario));
        std::cout << "selected:";
        for (const auto& u : sw.selected) std::cout << " " << u;
        std::cout << "\n";
        f = sw.fit;
      } else {
        f = fit_design(ds, DesignSpec::from_scenario(scenario));
      }
      std::cout << "deviance " << num(f.deviance) << " aic " << num(f.aic) << (f.converged ? "" : " (not converged)") << "\n";
      write_file(c_fit.out, coefficient_table(f));
    } else if (*ev) {
      auto cfg = load_config(c_eval);
      if (!ev_scenario.empty()) cfg.scenario = parse_scenario_kind(ev_scenario);
      const Dataset train = load_portfolio(ev_train, cfg.schema, CsvOptions{cfg.delimiter});
      const auto scenario = builtin_scenario(cfg.scenario, cfg.reading);
      const auto truth = DesignSpec::from_scenario(scenario);
      const BinMap bins = BinMap::build(train, covariate_names(train.schema()), cfg.metrics.n_bins);
      const FittedGLM ref = fit_design(train, truth);
      const Eigen::VectorXd beta_star =
          Eigen::Map<const Eigen::VectorXd>(scenario.coefficients.data(), static_cast<Eigen::Index>(scenario.coefficients.size()));
      const Eigen::VectorXd mse = mse_ref(cfg.metrics.mse, beta_star, ref);
      std::string out = "method,metric,value\n";
      bool partial = false;
      for (const auto& path : ev_syn) {
        const std::string name = std::filesystem::path(path).stem().string();
        const auto syn = ingest_synthetic(path, cfg.schema, cfg.delimiter);
        const auto m = dataset_metrics(RatioTable::build(train, syn.data, bins));
        const std::pair<const char*, double> rows[] = {
            {"categorical_mae", m.categorical_mae}, {"categorical_mape", m.categorical_mape},
            {"numeric_mae", m.numeric_mae},         {"numeric_mape", m.numeric_mape},
            {"pairwise_mae", m.pairwise_mae},       {"pairwise_mape", m.pairwise_mape},
            {"correlation_mae", m.correlation_mae}, {"correlation_mape", m.correlation_mape}};
        for (const auto& [k, v] : rows) out += name + "," + k + "," + num(v) + "\n";
        if (!syn.has_response) {
          out += name + ",m1,nan\n" + name + ",m2,nan\n";
          std::cerr << name << ": missing_response\n";
          partial = true;
          continue;
        }
        const FittedGLM f = fit_design(syn.data, truth);
        ModelMetricInputs in{beta_star, ref.beta, mse, {f.beta}};
        out += name + ",m1," + num(m1(in)) + "\n" + name + ",m2," + num(m2(in)) + "\n";
      }
      write_file(c_eval.out, out);
      if (partial) return 3;
    } else if (*aug) {
      const auto cfg = load_config(c_aug);
      const std::size_t m = aug_parts ? *aug_parts : cfg.parts;
      const Dataset train = load_portfolio(aug_train, cfg.schema, CsvOptions{cfg.delimiter});
      const Dataset syn = load_portfolio(aug_syn, cfg.schema, CsvOptions{cfg.delimiter});
      const auto parts = partition_synthetic(syn, m, SeedSchedule::partition(cfg.seed));
      write_csv(assemble(train, parts, StructureParam{aug_t, aug_L}), c_aug.out, CsvOptions{cfg.delimiter});
    } else if (*exp) {
      auto cfg = load_config(c_exp);
      if (!c_exp.out.empty()) cfg.output = c_exp.out;
      if (cfg.output.empty()) throw ConfigError("experiment: no output directory (--out or config \"output\")");
      const auto store = run_experiment(cfg);
      persist_results(store, cfg, cfg.output);
      for (const auto& f : store.failures)
        std::cerr << f.method << " #" << f.replicate << " " << f.stage << ": " << f.reason << " (" << f.message << ")\n";
      return exit_code(store);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
