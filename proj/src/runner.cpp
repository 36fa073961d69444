#include "actugen/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include <json.hpp>

#include "actugen/error.hpp"
#include "actugen/rng.hpp"
#include "actugen/surrogate.hpp"

namespace actugen {

using nlohmann::json;

namespace {

void check_keys(const json& obj, std::initializer_list<std::string_view> allowed, std::string_view where) {
  if (!obj.is_object()) throw ConfigError(std::string(where) + ": expected an object");
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError(std::string(where) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get_as(const json& obj, std::string_view key, std::string_view where) {
  try {
    return obj.at(std::string(key)).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string(where) + "." + std::string(key) + ": " + e.what());
  }
}

std::size_t get_count(const json& obj, std::string_view key, std::string_view where) {
  const auto& v = obj.at(std::string(key));
  if (!v.is_number_integer() || v.get<long long>() < 0)
    throw ConfigError(std::string(where) + "." + std::string(key) + ": expected a non-negative integer");
  return v.get<std::size_t>();
}

ColumnKind parse_kind(const std::string& s) {
  if (s == "categorical") return ColumnKind::categorical;
  if (s == "numeric") return ColumnKind::numeric;
  throw ConfigError("schema: unknown column kind '" + s + "'");
}

ColumnRole parse_role(const std::string& s) {
  if (s == "covariate") return ColumnRole::covariate;
  if (s == "exposure") return ColumnRole::exposure;
  if (s == "response") return ColumnRole::response;
  throw ConfigError("schema: unknown column role '" + s + "'");
}

Schema parse_schema(const json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "fremtpl2") return fremtpl2_schema();
    throw ConfigError("schema: unknown built-in schema '" + j.get<std::string>() + "'");
  }
  if (!j.is_array()) throw ConfigError("schema: expected \"fremtpl2\" or an array of columns");
  std::vector<ColumnSpec> cols;
  for (const auto& c : j) {
    check_keys(c, {"name", "kind", "levels", "role", "source"}, "schema column");
    ColumnSpec spec;
    spec.name = get_as<std::string>(c, "name", "schema column");
    spec.kind = parse_kind(c.contains("kind") ? get_as<std::string>(c, "kind", "schema column") : "numeric");
    if (c.contains("levels")) spec.levels = get_as<std::vector<std::string>>(c, "levels", "schema column");
    if (c.contains("role")) spec.role = parse_role(get_as<std::string>(c, "role", "schema column"));
    if (c.contains("source")) spec.source = get_as<std::string>(c, "source", "schema column");
    cols.push_back(std::move(spec));
  }
  try {
    return Schema(std::move(cols));
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

json schema_json(const Schema& schema) {
  json arr = json::array();
  for (const auto& c : schema.columns()) {
    json col{{"name", c.name}, {"kind", std::string(to_string(c.kind))}, {"role", std::string(to_string(c.role))}};
    if (c.is_categorical()) col["levels"] = c.levels;
    if (!c.source.empty()) col["source"] = c.source;
    arr.push_back(std::move(col));
  }
  return arr;
}

MethodSpec parse_method(const json& j) {
  MethodSpec m;
  if (j.is_string()) {
    m.name = j.get<std::string>();
    if (m.name == kTrainingMethod) {
      m.source = MethodSpec::Source::training;
    } else {
      m.generator = parse_generator_kind(m.name);
      m.name = std::string(to_string(m.generator));
    }
    return m;
  }
  check_keys(j, {"name", "paths"}, "method");
  m.name = get_as<std::string>(j, "name", "method");
  m.source = MethodSpec::Source::external;
  m.paths = get_as<std::vector<std::string>>(j, "paths", "method");
  return m;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt(*v) : "nan"; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string join(const std::vector<std::string>& parts, std::string_view sep) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += sep;
    out += parts[i];
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : s / static_cast<double>(v.size());
}

std::string reason_of(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return "config_error";
  if (dynamic_cast<const ModelError*>(&e)) return "model_error";
  return "data_error";
}

std::pair<double, double> test_scores(const FittedGLM& fit, const DesignSpec& spec, const Dataset& test) {
  const Eigen::VectorXd mu = predict(fit, test, spec);
  const Eigen::VectorXd y = response_vector(test);
  const std::span<const double> ys(y.data(), static_cast<std::size_t>(y.size()));
  const std::span<const double> ms(mu.data(), static_cast<std::size_t>(mu.size()));
  return {poisson_deviance(ys, ms) / static_cast<double>(y.size()), rmse(ys, ms)};
}

}  // namespace

// ---------------------------------------------------------------------------
// Config

ExperimentConfig::ExperimentConfig() : schema(fremtpl2_schema()) {
  methods = {parse_method(json("training")), parse_method(json("mice")), parse_method(json("mice_all_syn")),
             parse_method(json("mice_tabulator"))};
}

ExperimentConfig ExperimentConfig::from_json_text(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, {"version", "data", "surrogate_rows", "delimiter", "schema", "scenario", "scenario_reading",
                 "n_experiments", "methods", "parts", "metrics", "mice", "train_fraction", "subsample_rows", "seed",
                 "output", "stepwise", "persist_synthetic"},
             "config");
  if (!j.contains("version")) throw ConfigError("config: missing \"version\"");
  if (!j["version"].is_number_integer() || j["version"].get<int>() != kConfigVersion)
    throw ConfigError("config: unsupported version (expected " + std::to_string(kConfigVersion) + ")");

  ExperimentConfig c;
  const std::string where = "config";
  if (j.contains("data")) c.data = j["data"].is_null() ? "" : get_as<std::string>(j, "data", where);
  if (j.contains("surrogate_rows")) c.surrogate_rows = get_count(j, "surrogate_rows", where);
  if (j.contains("delimiter")) {
    const auto d = get_as<std::string>(j, "delimiter", where);
    if (d.size() != 1) throw ConfigError("config.delimiter: expected one character");
    c.delimiter = d[0];
  }
  if (j.contains("schema")) c.schema = parse_schema(j["schema"]);
  if (j.contains("scenario")) c.scenario = parse_scenario_kind(get_as<std::string>(j, "scenario", where));
  if (j.contains("scenario_reading")) {
    const auto& r = j["scenario_reading"];
    check_keys(r, {"area_lowercase_c_is_C", "power_half_open_is_set"}, "config.scenario_reading");
    if (r.contains("area_lowercase_c_is_C"))
      c.reading.area_lowercase_c_is_C = get_as<bool>(r, "area_lowercase_c_is_C", "config.scenario_reading");
    if (r.contains("power_half_open_is_set"))
      c.reading.power_half_open_is_set = get_as<bool>(r, "power_half_open_is_set", "config.scenario_reading");
  }
  if (j.contains("n_experiments")) c.n_experiments = get_count(j, "n_experiments", where);
  if (j.contains("methods")) {
    if (!j["methods"].is_array()) throw ConfigError("config.methods: expected an array");
    c.methods.clear();
    for (const auto& m : j["methods"]) c.methods.push_back(parse_method(m));
  }
  if (j.contains("parts")) c.parts = get_count(j, "parts", where);
  if (j.contains("metrics")) {
    const auto& m = j["metrics"];
    check_keys(m, {"mse_convention", "n_bins", "mape_zero"}, "config.metrics");
    if (m.contains("mse_convention"))
      c.metrics.mse = parse_mse_convention(get_as<std::string>(m, "mse_convention", "config.metrics"));
    if (m.contains("n_bins")) c.metrics.n_bins = get_count(m, "n_bins", "config.metrics");
    if (m.contains("mape_zero")) {
      const auto z = get_as<std::string>(m, "mape_zero", "config.metrics");
      if (z != "exclude" && z != "keep") throw ConfigError("config.metrics.mape_zero: expected exclude or keep");
      c.metrics.mape_keep_zero = z == "keep";
    }
  }
  if (j.contains("mice")) {
    const auto& m = j["mice"];
    const std::string w = "config.mice";
    check_keys(m, {"iterations", "forest", "response_as_categorical", "tabulator_disjoint"}, w);
    if (m.contains("iterations")) c.mice.iterations = get_count(m, "iterations", w);
    if (m.contains("response_as_categorical"))
      c.mice.response_as_categorical = get_as<bool>(m, "response_as_categorical", w);
    if (m.contains("tabulator_disjoint")) c.tabulator_disjoint = get_as<bool>(m, "tabulator_disjoint", w);
    if (m.contains("forest")) {
      const auto& f = m["forest"];
      const std::string wf = "config.mice.forest";
      check_keys(f, {"n_trees", "min_leaf", "max_depth", "features_per_split"}, wf);
      if (f.contains("n_trees")) c.mice.forest.n_trees = get_count(f, "n_trees", wf);
      if (f.contains("min_leaf")) c.mice.forest.min_leaf = get_count(f, "min_leaf", wf);
      if (f.contains("max_depth")) c.mice.forest.max_depth = get_count(f, "max_depth", wf);
      if (f.contains("features_per_split")) c.mice.forest.features_per_split = get_count(f, "features_per_split", wf);
    }
  }
  if (j.contains("train_fraction")) c.train_fraction = get_as<double>(j, "train_fraction", where);
  if (j.contains("subsample_rows")) c.subsample_rows = get_count(j, "subsample_rows", where);
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !j["seed"].is_number_integer()) throw ConfigError("config.seed: expected an integer");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("output")) c.output = get_as<std::string>(j, "output", where);
  if (j.contains("stepwise")) c.stepwise = get_as<bool>(j, "stepwise", where);
  if (j.contains("persist_synthetic")) c.persist_synthetic = get_as<bool>(j, "persist_synthetic", where);
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json_text(buf.str());
}

std::string ExperimentConfig::to_json_text() const {
  json methods_json = json::array();
  for (const auto& m : methods) {
    if (m.source == MethodSpec::Source::external)
      methods_json.push_back({{"name", m.name}, {"paths", m.paths}});
    else
      methods_json.push_back(m.name);
  }
  json j{{"version", kConfigVersion},
         {"data", data},
         {"surrogate_rows", surrogate_rows},
         {"delimiter", std::string(1, delimiter)},
         {"schema", schema_json(schema)},
         {"scenario", std::string(to_string(scenario))},
         {"scenario_reading",
          {{"area_lowercase_c_is_C", reading.area_lowercase_c_is_C},
           {"power_half_open_is_set", reading.power_half_open_is_set}}},
         {"n_experiments", n_experiments},
         {"methods", methods_json},
         {"parts", parts},
         {"metrics",
          {{"mse_convention", std::string(to_string(metrics.mse))},
           {"n_bins", metrics.n_bins},
           {"mape_zero", metrics.mape_keep_zero ? "keep" : "exclude"}}},
         {"mice",
          {{"iterations", mice.iterations},
           {"forest",
            {{"n_trees", mice.forest.n_trees},
             {"min_leaf", mice.forest.min_leaf},
             {"max_depth", mice.forest.max_depth},
             {"features_per_split", mice.forest.features_per_split}}},
           {"response_as_categorical", mice.response_as_categorical},
           {"tabulator_disjoint", tabulator_disjoint}}},
         {"train_fraction", train_fraction},
         {"subsample_rows", subsample_rows},
         {"seed", seed},
         {"output", output},
         {"stepwise", stepwise},
         {"persist_synthetic", persist_synthetic}};
  return j.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
  if (n_experiments == 0) throw ConfigError("config: n_experiments must be at least 1");
  if (methods.empty()) throw ConfigError("config: method list is empty");
  if (parts == 0) throw ConfigError("config: parts must be at least 1");
  if (metrics.n_bins == 0) throw ConfigError("config: metrics.n_bins must be at least 1");
  if (mice.iterations == 0) throw ConfigError("config: mice.iterations must be at least 1");
  if (mice.forest.n_trees == 0 || mice.forest.min_leaf == 0) throw ConfigError("config: forest sizes must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("config: train_fraction must lie in (0, 1)");
  if (data.empty() && surrogate_rows == 0) throw ConfigError("config: surrogate_rows must be positive");
  if (!schema.response()) throw ConfigError("config: schema needs a response column");
  std::set<std::string> names;
  for (const auto& m : methods) {
    if (m.name.empty()) throw ConfigError("config: method without a name");
    if (!names.insert(m.name).second) throw ConfigError("config: duplicate method '" + m.name + "'");
    if (m.source == MethodSpec::Source::external && m.paths.empty())
      throw ConfigError("config: external method '" + m.name + "' lists no paths");
  }
}

// ---------------------------------------------------------------------------
// Seeds and data

std::uint64_t SeedSchedule::surrogate() const { return derive_seed(master, "surrogate"); }
std::uint64_t SeedSchedule::subsample() const { return derive_seed(master, "subsample"); }
std::uint64_t SeedSchedule::simulate() const { return derive_seed(master, "simulate"); }
std::uint64_t SeedSchedule::split() const { return derive_seed(master, "split"); }
std::uint64_t SeedSchedule::replicate(std::string_view method, std::size_t k) const {
  return derive_seed(derive_seed(master, "method"), method, k);
}
std::uint64_t SeedSchedule::partition(std::uint64_t replicate_seed) { return derive_seed(replicate_seed, "partition"); }

PreparedData prepare_data(const ExperimentConfig& cfg) {
  const SeedSchedule seeds{cfg.seed};
  PreparedData p;
  Dataset raw;
  if (cfg.data.empty()) {
    p.source = "surrogate";
    raw = surrogate_portfolio(cfg.surrogate_rows, seeds.surrogate());
  } else {
    p.source = cfg.data;
    raw = load_portfolio(cfg.data, cfg.schema, CsvOptions{cfg.delimiter});
  }
  p.source_rows = raw.n_rows();
  Dataset ds = with_unit_exposure(raw);
  if (cfg.subsample_rows > 0 && cfg.subsample_rows < ds.n_rows()) ds = subsample_rows(ds, cfg.subsample_rows, seeds.subsample());
  const Scenario scenario = builtin_scenario(cfg.scenario, cfg.reading);
  const auto sim = simulate_counts(ds, scenario, seeds.simulate());
  p.mean_frequency = sim.mean_frequency;
  p.full = ds.with_column(*ds.schema().response(), sim.counts);
  p.split = split_train_test(p.full, cfg.train_fraction, seeds.split());
  return p;
}

IngestedSynthetic ingest_synthetic(const std::string& path, const Schema& schema, char delimiter) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::string header;
  std::getline(in, header);
  in.close();
  if (header.rfind("\xEF\xBB\xBF", 0) == 0) header.erase(0, 3);
  std::set<std::string> present;
  {
    std::string field;
    std::stringstream ss(header);
    while (std::getline(ss, field, delimiter)) {
      while (!field.empty() && (field.back() == '\r' || field.back() == ' ')) field.pop_back();
      if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
      present.insert(field);
    }
  }
  std::vector<ColumnSpec> cols;
  bool has_exposure = false, has_response = false;
  for (const auto& c : schema.columns()) {
    const bool here = present.count(c.header()) > 0;
    if (c.role == ColumnRole::exposure) has_exposure = here;
    if (c.role == ColumnRole::response) has_response = here;
    if (here) cols.push_back(c);
  }
  Dataset loaded = load_portfolio(path, Schema(cols), CsvOptions{delimiter});
  IngestedSynthetic out;
  out.has_response = has_response;
  if (has_response && has_exposure) {
    out.data = with_unit_exposure(load_portfolio(path, schema, CsvOptions{delimiter}));
    return out;
  }
  // Rebuild under the full schema, filling exposure with 1; without a
  // response the response role is dropped.
  std::vector<ColumnSpec> full;
  std::vector<std::vector<double>> values;
  for (const auto& c : schema.columns()) {
    if (c.role == ColumnRole::response && !has_response) continue;
    full.push_back(c);
    if (c.role == ColumnRole::exposure && !has_exposure) {
      values.emplace_back(loaded.n_rows(), 1.0);
      continue;
    }
    auto col = loaded.column(c.name);
    values.emplace_back(col.begin(), col.end());
  }
  out.data = with_unit_exposure(Dataset(Schema(full), std::move(values)));
  return out;
}

// ---------------------------------------------------------------------------
// Store

const ModelMetricRecord* ResultsStore::model_metric(std::string_view method, StructureParam s) const {
  for (const auto& r : model_metrics)
    if (r.method == method && r.s == s) return &r;
  return nullptr;
}

MethodSummary ResultsStore::summary(std::string_view method) const {
  MethodSummary out;
  out.method = std::string(method);
  std::vector<std::vector<double>> f(12);
  std::size_t zero = 0, excluded = 0;
  for (const auto& r : dataset_metrics) {
    if (r.method != method) continue;
    const auto& m = r.metrics;
    const double vals[] = {m.categorical_mae,       m.categorical_mape,  m.numeric_mae,          m.numeric_mape,
                           m.pairwise_mae,          m.pairwise_mape,     m.correlation_mae,      m.correlation_mape,
                           m.categorical_mape_keep, m.numeric_mape_keep, m.pairwise_mape_keep,   m.correlation_mape_keep};
    for (std::size_t i = 0; i < 12; ++i) f[i].push_back(vals[i]);
    zero += m.zero_denominators;
    excluded += m.excluded_correlation_pairs;
    ++out.replicates;
  }
  if (out.replicates > 0) {
    auto& d = out.dataset;
    d.categorical_mae = mean_of(f[0]);
    d.categorical_mape = mean_of(f[1]);
    d.numeric_mae = mean_of(f[2]);
    d.numeric_mape = mean_of(f[3]);
    d.pairwise_mae = mean_of(f[4]);
    d.pairwise_mape = mean_of(f[5]);
    d.correlation_mae = mean_of(f[6]);
    d.correlation_mape = mean_of(f[7]);
    d.categorical_mape_keep = mean_of(f[8]);
    d.numeric_mape_keep = mean_of(f[9]);
    d.pairwise_mape_keep = mean_of(f[10]);
    d.correlation_mape_keep = mean_of(f[11]);
    d.zero_denominators = zero;
    d.excluded_correlation_pairs = excluded;
  }
  const StructureParam s = method == kTrainingMethod ? StructureParam{1, 0} : StructureParam{0, parts};
  if (const auto* mm = model_metric(method, s)) {
    out.m1 = mm->m1;
    out.m2 = mm->m2;
  }
  std::vector<double> correct, incorrect, missing, dev, err;
  for (const auto& r : selections) {
    if (r.method != method) continue;
    correct.push_back(static_cast<double>(r.scores.correct));
    incorrect.push_back(static_cast<double>(r.scores.incorrect));
    missing.push_back(static_cast<double>(r.scores.missing_main_effects));
    dev.push_back(r.test_deviance);
    err.push_back(r.test_rmse);
  }
  if (!correct.empty()) {
    out.correct = mean_of(correct);
    out.incorrect = mean_of(incorrect);
    out.missing_main_effects = mean_of(missing);
    out.test_deviance = mean_of(dev);
    out.test_rmse = mean_of(err);
  }
  std::vector<double> tdev, terr;
  for (const auto& r : tests) {
    if (r.method != method) continue;
    tdev.push_back(r.mean_deviance);
    terr.push_back(r.rmse);
  }
  if (!tdev.empty()) {
    out.true_test_deviance = mean_of(tdev);
    out.true_test_rmse = mean_of(terr);
  }
  return out;
}

int exit_code(const ResultsStore& store) { return store.failures.empty() ? 0 : 3; }

// ---------------------------------------------------------------------------
// Experiment

ResultsStore run_experiment(const ExperimentConfig& cfg) {
  cfg.validate();
  const SeedSchedule seeds{cfg.seed};
  const PreparedData prepared = prepare_data(cfg);
  const Dataset& train = prepared.split.train;
  const Dataset& test = prepared.split.test;
  const Scenario scenario = builtin_scenario(cfg.scenario, cfg.reading);
  const DesignSpec truth = DesignSpec::from_scenario(scenario);
  const auto parents = interaction_parents(scenario);
  const BinMap bins = BinMap::build(train, covariate_names(train.schema()), cfg.metrics.n_bins);

  ResultsStore store;
  store.data_source = prepared.source;
  store.n_train = train.n_rows();
  store.n_test = test.n_rows();
  store.mean_frequency = prepared.mean_frequency;
  store.parts = cfg.parts;
  store.term_names = truth.names();
  store.truth_units = scenario.units();
  store.beta_star = Eigen::Map<const Eigen::VectorXd>(scenario.coefficients.data(),
                                                      static_cast<Eigen::Index>(scenario.coefficients.size()));

  const FittedGLM reference = fit_design(train, truth);
  if (!reference.converged) throw ModelError("training fit of the true structure did not converge");
  store.beta_hat_ref = reference.beta;
  store.mse_ref = mse_ref(cfg.metrics.mse, store.beta_star, reference);

  FitOptions warm;
  warm.start = reference.beta;
  StepwiseOptions step_options;

  std::optional<std::filesystem::path> syn_dir;
  if (cfg.persist_synthetic && !cfg.output.empty()) {
    syn_dir = std::filesystem::path(cfg.output) / "synthetic";
    std::filesystem::create_directories(*syn_dir);
  }

  const auto grid = structure_grid(cfg.parts);
  for (const auto& method : cfg.methods) {
    store.methods.push_back(method.name);
    auto fail = [&](std::size_t k, std::string stage, std::string reason, std::string message) {
      store.failures.push_back({method.name, k, std::move(stage), std::move(reason), std::move(message)});
    };

    if (method.source == MethodSpec::Source::training) {
      store.dataset_metrics.push_back({method.name, 1, dataset_metrics(RatioTable::build(train, train, bins))});
      store.fits.push_back({method.name, 1, {1, 0}, train.n_rows(), reference});
      const auto [dev, err] = test_scores(reference, truth, test);
      store.tests.push_back({method.name, 1, dev, err});
      if (cfg.stepwise) {
        try {
          auto sw = stepwise_aic(train, selection_scope(train, scenario), step_options);
          const auto [sdev, serr] = test_scores(sw.fit, sw.spec, test);
          store.selections.push_back(
              {method.name, 1, sw.selected, selection_scores(sw.selected, store.truth_units, parents), sdev, serr});
        } catch (const std::runtime_error& e) {
          fail(1, "stepwise", reason_of(e), e.what());
        }
      }
      ModelMetricInputs in{store.beta_star, store.beta_hat_ref, store.mse_ref, {reference.beta}};
      store.model_metrics.push_back({method.name, {1, 0}, 1, m1(in), m2(in)});
      continue;
    }

    std::map<std::size_t, std::vector<Eigen::VectorXd>> runs;  // grid index -> betas
    for (std::size_t k = 1; k <= cfg.n_experiments; ++k) {
      const std::uint64_t rep_seed = seeds.replicate(method.name, k);
      IngestedSynthetic syn;
      try {
        if (method.source == MethodSpec::Source::generator) {
          AmputationPlan plan = AmputationPlan::defaults(method.generator);
          plan.disjoint_rounds = cfg.tabulator_disjoint;
          syn.data = generate_synthetic(train, plan, cfg.mice, rep_seed).data;
        } else {
          if (k > method.paths.size()) {
            fail(k, "ingest", "data_error", "no synthetic file listed for this replicate");
            continue;
          }
          syn = ingest_synthetic(method.paths[k - 1], cfg.schema, cfg.delimiter);
        }
        if (syn_dir) {
          write_csv(syn.data, (*syn_dir / (method.name + "_" + std::to_string(k) + ".csv")).string(),
                    CsvOptions{cfg.delimiter});
        }
        store.dataset_metrics.push_back({method.name, k, dataset_metrics(RatioTable::build(train, syn.data, bins))});
      } catch (const std::runtime_error& e) {
        fail(k, "generate", reason_of(e), e.what());
        continue;
      }
      if (!syn.has_response) {
        fail(k, "fit", "missing_response", "synthetic data has no response column");
        continue;
      }

      std::vector<Dataset> parts;
      try {
        parts = partition_synthetic(syn.data, cfg.parts, SeedSchedule::partition(rep_seed));
      } catch (const std::runtime_error& e) {
        fail(k, "partition", reason_of(e), e.what());
        continue;
      }
      for (std::size_t g = 0; g < grid.size(); ++g) {
        const auto s = grid[g];
        if (s.t == 1 && s.L == 0) {
          runs[g].push_back(reference.beta);
          continue;
        }
        try {
          const Dataset assembled = assemble(train, parts, s);
          FittedGLM fit = fit_design(assembled, truth, warm);
          if (!fit.converged) {
            fail(k, "fit " + s.label(), "not_converged", "IRLS did not converge");
            continue;
          }
          runs[g].push_back(fit.beta);
          if (s.t == 0) {
            const auto [dev, err] = test_scores(fit, truth, test);
            store.tests.push_back({method.name, k, dev, err});
          }
          store.fits.push_back({method.name, k, s, assembled.n_rows(), std::move(fit)});
        } catch (const std::runtime_error& e) {
          fail(k, "fit " + s.label(), reason_of(e), e.what());
        }
      }
      if (cfg.stepwise) {
        try {
          auto sw = stepwise_aic(syn.data, selection_scope(syn.data, scenario), step_options);
          const auto [sdev, serr] = test_scores(sw.fit, sw.spec, test);
          store.selections.push_back(
              {method.name, k, sw.selected, selection_scores(sw.selected, store.truth_units, parents), sdev, serr});
        } catch (const std::runtime_error& e) {
          fail(k, "stepwise", reason_of(e), e.what());
        }
      }
    }
    for (std::size_t g = 0; g < grid.size(); ++g) {
      auto it = runs.find(g);
      if (it == runs.end() || it->second.empty()) continue;
      ModelMetricInputs in{store.beta_star, store.beta_hat_ref, store.mse_ref, it->second};
      store.model_metrics.push_back({method.name, grid[g], it->second.size(), m1(in), m2(in)});
    }
  }
  return store;
}

// ---------------------------------------------------------------------------
// Ranking and curves

std::vector<std::size_t> competition_ranks(const std::vector<double>& values, bool higher_is_better) {
  std::vector<std::size_t> ranks(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::size_t better = 0;
    for (std::size_t j = 0; j < values.size(); ++j)
      if (higher_is_better ? values[j] > values[i] : values[j] < values[i]) ++better;
    ranks[i] = better + 1;
  }
  return ranks;
}

namespace {
const std::vector<std::string> kRankMetrics{"categorical_mae", "categorical_mape", "numeric_mae",     "numeric_mape",
                                            "pairwise_mae",    "pairwise_mape",    "correlation_mae", "correlation_mape",
                                            "m1",              "m2",               "correct",         "incorrect",
                                            "test_deviance",   "test_rmse"};
}

std::optional<double> summary_metric(const MethodSummary& s, std::string_view metric) {
  const bool has_data = s.replicates > 0;
  if (metric == "categorical_mae") return has_data ? std::optional(s.dataset.categorical_mae) : std::nullopt;
  if (metric == "categorical_mape") return has_data ? std::optional(s.dataset.categorical_mape) : std::nullopt;
  if (metric == "numeric_mae") return has_data ? std::optional(s.dataset.numeric_mae) : std::nullopt;
  if (metric == "numeric_mape") return has_data ? std::optional(s.dataset.numeric_mape) : std::nullopt;
  if (metric == "pairwise_mae") return has_data ? std::optional(s.dataset.pairwise_mae) : std::nullopt;
  if (metric == "pairwise_mape") return has_data ? std::optional(s.dataset.pairwise_mape) : std::nullopt;
  if (metric == "correlation_mae") return has_data ? std::optional(s.dataset.correlation_mae) : std::nullopt;
  if (metric == "correlation_mape") return has_data ? std::optional(s.dataset.correlation_mape) : std::nullopt;
  if (metric == "m1") return s.m1;
  if (metric == "m2") return s.m2;
  if (metric == "correct") return s.correct;
  if (metric == "incorrect") return s.incorrect;
  if (metric == "test_deviance") return s.test_deviance ? s.test_deviance : s.true_test_deviance;
  if (metric == "test_rmse") return s.test_rmse ? s.test_rmse : s.true_test_rmse;
  throw ConfigError("unknown metric '" + std::string(metric) + "'");
}

RankingTable rank_methods(const ResultsStore& store, std::vector<std::string> metrics) {
  if (metrics.empty()) metrics = kRankMetrics;
  RankingTable t;
  t.metrics = metrics;
  t.methods = store.methods;
  std::vector<MethodSummary> summaries;
  for (const auto& m : store.methods) summaries.push_back(store.summary(m));
  for (const auto& metric : metrics) {
    std::vector<double> vals;
    std::vector<double> present;
    std::vector<std::size_t> where;
    for (std::size_t i = 0; i < summaries.size(); ++i) {
      auto v = summary_metric(summaries[i], metric);
      vals.push_back(v ? *v : std::numeric_limits<double>::quiet_NaN());
      if (v && !std::isnan(*v)) {
        present.push_back(*v);
        where.push_back(i);
      }
    }
    const auto r = competition_ranks(present, metric == "correct");
    std::vector<std::optional<std::size_t>> ranks(vals.size());
    for (std::size_t i = 0; i < where.size(); ++i) ranks[where[i]] = r[i];
    t.values.push_back(std::move(vals));
    t.ranks.push_back(std::move(ranks));
  }
  return t;
}

AugmentationCurve augmentation_curve(const ResultsStore& store, std::string_view method, std::string_view metric) {
  if (metric != "m1" && metric != "m2") throw ConfigError("augmentation curve metric must be m1 or m2");
  AugmentationCurve c;
  c.method = std::string(method);
  c.metric = std::string(metric);
  auto value_at = [&](StructureParam s) -> std::optional<double> {
    const auto* r = store.model_metric(method, s);
    if (!r) return std::nullopt;
    return metric == "m1" ? r->m1 : r->m2;
  };
  for (std::size_t L = 0; L <= store.parts; ++L) {
    const StructureParam s{1, L};
    CurvePoint p{L, s.proportion(store.parts), value_at(s)};
    if (!p.value) c.missing.push_back(s.label());
    c.points.push_back(p);
  }
  c.all_synthetic = value_at({0, store.parts});
  if (!c.all_synthetic) c.missing.push_back(StructureParam{0, store.parts}.label());

  std::size_t compared = 0;
  for (std::size_t L = 2; L < c.points.size(); ++L) {
    if (!c.points[L].value || !c.points[L - 1].value) continue;
    ++compared;
    if (*c.points[L].value < *c.points[L - 1].value) ++c.inversions;
  }
  c.increasing_trend = c.missing.empty() && compared > 0 && c.inversions <= 1;
  if (c.all_synthetic) {
    c.asymptote_above = true;
    for (const auto& p : c.points)
      if (!p.value || !(*c.all_synthetic > *p.value)) c.asymptote_above = false;
  }
  return c;
}

// ---------------------------------------------------------------------------
// Persistence

void persist_results(const ResultsStore& store, const ExperimentConfig& cfg, const std::string& dir) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  fs::create_directories(root);

  {
    std::string out =
        "method,replicate,categorical_mae,categorical_mape,numeric_mae,numeric_mape,pairwise_mae,pairwise_mape,"
        "correlation_mae,correlation_mape,categorical_mape_keep,numeric_mape_keep,pairwise_mape_keep,"
        "correlation_mape_keep,zero_denominators,excluded_correlation_pairs\n";
    for (const auto& r : store.dataset_metrics) {
      const auto& m = r.metrics;
      out += csv_field(r.method) + "," + std::to_string(r.replicate) + "," + fmt(m.categorical_mae) + "," +
             fmt(m.categorical_mape) + "," + fmt(m.numeric_mae) + "," + fmt(m.numeric_mape) + "," +
             fmt(m.pairwise_mae) + "," + fmt(m.pairwise_mape) + "," + fmt(m.correlation_mae) + "," +
             fmt(m.correlation_mape) + "," + fmt(m.categorical_mape_keep) + "," + fmt(m.numeric_mape_keep) + "," +
             fmt(m.pairwise_mape_keep) + "," + fmt(m.correlation_mape_keep) + "," +
             std::to_string(m.zero_denominators) + "," + std::to_string(m.excluded_correlation_pairs) + "\n";
    }
    write_text(root / "dataset_metrics.csv", out);
  }
  {
    std::string out = "method,replicate,variable,mae,mape,mape_keep,terms,zero_denominators\n";
    for (const auto& r : store.dataset_metrics)
      for (const auto& [name, e] : r.metrics.per_variable)
        out += csv_field(r.method) + "," + std::to_string(r.replicate) + "," + name + "," + fmt(e.mae) + "," +
               fmt(e.mape) + "," + fmt(e.mape_keep) + "," + std::to_string(e.terms) + "," +
               std::to_string(e.zero_denominators) + "\n";
    write_text(root / "variable_metrics.csv", out);
  }
  {
    std::string out = "method,replicate,structure,rows,term,estimate,std_error,deviance,aic,iterations\n";
    for (const auto& r : store.fits) {
      const auto se = r.fit.standard_errors();
      for (Eigen::Index j = 0; j < r.fit.beta.size(); ++j)
        out += csv_field(r.method) + "," + std::to_string(r.replicate) + "," + csv_field(r.s.label()) + "," +
               std::to_string(r.n_rows) + "," + csv_field(r.fit.names[static_cast<std::size_t>(j)]) + "," +
               fmt(r.fit.beta[j]) + "," + fmt(se[j]) + "," + fmt(r.fit.deviance) + "," + fmt(r.fit.aic) + "," +
               std::to_string(r.fit.iterations) + "\n";
    }
    write_text(root / "fits.csv", out);
  }
  {
    std::string out = "method,t,L,proportion,runs,m1,m2\n";
    for (const auto& r : store.model_metrics)
      out += csv_field(r.method) + "," + std::to_string(r.s.t) + "," + std::to_string(r.s.L) + "," +
             fmt(r.s.proportion(store.parts)) + "," + std::to_string(r.runs) + "," + fmt(r.m1) + "," + fmt(r.m2) + "\n";
    write_text(root / "model_metrics.csv", out);
  }
  {
    std::string out = "method,replicate,correct,incorrect,missing_main_effects,test_mean_deviance,test_rmse,selected\n";
    for (const auto& r : store.selections)
      out += csv_field(r.method) + "," + std::to_string(r.replicate) + "," + std::to_string(r.scores.correct) + "," +
             std::to_string(r.scores.incorrect) + "," + std::to_string(r.scores.missing_main_effects) + "," +
             fmt(r.test_deviance) + "," + fmt(r.test_rmse) + "," + csv_field(join(r.selected, ";")) + "\n";
    write_text(root / "selection.csv", out);
  }
  {
    std::string out = "method,replicate,test_mean_deviance,test_rmse\n";
    for (const auto& r : store.tests)
      out += csv_field(r.method) + "," + std::to_string(r.replicate) + "," + fmt(r.mean_deviance) + "," +
             fmt(r.rmse) + "\n";
    write_text(root / "test_metrics.csv", out);
  }
  {
    std::string out = "method,replicate,stage,reason,message\n";
    for (const auto& r : store.failures)
      out += csv_field(r.method) + "," + std::to_string(r.replicate) + "," + csv_field(r.stage) + "," + r.reason +
             "," + csv_field(r.message) + "\n";
    write_text(root / "failures.csv", out);
  }
  const RankingTable ranks = rank_methods(store);
  {
    std::string out = "method,replicates";
    for (const auto& m : ranks.metrics) out += "," + m;
    out += ",true_test_mean_deviance,true_test_rmse,missing_main_effects,ease_of_use\n";
    for (std::size_t i = 0; i < ranks.methods.size(); ++i) {
      const auto s = store.summary(ranks.methods[i]);
      out += csv_field(ranks.methods[i]) + "," + std::to_string(s.replicates);
      for (std::size_t k = 0; k < ranks.metrics.size(); ++k) out += "," + fmt(ranks.values[k][i]);
      out += "," + fmt_opt(s.true_test_deviance) + "," + fmt_opt(s.true_test_rmse) + "," +
             fmt_opt(s.missing_main_effects) + ",\n";
    }
    write_text(root / "summary.csv", out);
  }
  {
    std::string out = "method";
    for (const auto& m : ranks.metrics) out += "," + m;
    out += "\n";
    for (std::size_t i = 0; i < ranks.methods.size(); ++i) {
      out += csv_field(ranks.methods[i]);
      for (std::size_t k = 0; k < ranks.metrics.size(); ++k)
        out += "," + (ranks.ranks[k][i] ? std::to_string(*ranks.ranks[k][i]) : std::string());
      out += "\n";
    }
    write_text(root / "ranks.csv", out);
  }
  {
    std::string out = "method,metric,structure,L,proportion,value,increasing_trend,inversions,asymptote_above\n";
    for (const auto& method : store.methods) {
      if (method == kTrainingMethod) continue;
      for (const char* metric : {"m1", "m2"}) {
        const auto c = augmentation_curve(store, method, metric);
        const std::string flags = std::string(c.increasing_trend ? "true" : "false") + "," +
                                  std::to_string(c.inversions) + "," + (c.asymptote_above ? "true" : "false");
        for (const auto& p : c.points)
          out += csv_field(method) + "," + metric + "," + csv_field(StructureParam{1, p.L}.label()) + "," +
                 std::to_string(p.L) + "," + fmt(p.proportion) + "," + fmt_opt(p.value) + "," + flags + "\n";
        out += csv_field(method) + "," + metric + "," + csv_field(StructureParam{0, store.parts}.label()) + "," +
               std::to_string(store.parts) + ",all_synthetic," + fmt_opt(c.all_synthetic) + "," + flags + "\n";
      }
    }
    write_text(root / "augmentation.csv", out);
  }
  {
    const SeedSchedule seeds{cfg.seed};
    json seed_json{{"master", cfg.seed},         {"surrogate", seeds.surrogate()}, {"subsample", seeds.subsample()},
                   {"simulate", seeds.simulate()}, {"split", seeds.split()}};
    json reps = json::object();
    for (const auto& m : cfg.methods) {
      if (m.source != MethodSpec::Source::generator) continue;
      json list = json::array();
      for (std::size_t k = 1; k <= cfg.n_experiments; ++k) list.push_back(seeds.replicate(m.name, k));
      reps[m.name] = list;
    }
    seed_json["replicates"] = reps;
    json manifest{{"tool", "actugen"},
                  {"format_version", kConfigVersion},
                  {"config", json::parse(cfg.to_json_text())},
                  {"seeds", seed_json},
                  {"data",
                   {{"source", store.data_source},
                    {"n_train", store.n_train},
                    {"n_test", store.n_test},
                    {"mean_frequency", fmt(store.mean_frequency)}}},
                  {"true_coefficients", json::array()},
                  {"methods", store.methods},
                  {"failures", store.failures.size()},
                  {"files",
                   {"dataset_metrics.csv", "variable_metrics.csv", "fits.csv", "model_metrics.csv", "selection.csv",
                    "test_metrics.csv", "failures.csv", "summary.csv", "ranks.csv", "augmentation.csv"}}};
    for (std::size_t j = 0; j < store.term_names.size(); ++j)
      manifest["true_coefficients"].push_back(
          {{"term", store.term_names[j]},
           {"beta_star", fmt(store.beta_star[static_cast<Eigen::Index>(j)])},
           {"beta_hat", fmt(store.beta_hat_ref[static_cast<Eigen::Index>(j)])},
           {"mse_ref", fmt(store.mse_ref[static_cast<Eigen::Index>(j)])}});
    write_text(root / "manifest.json", manifest.dump(2) + "\n");
  }
}

}  // namespace actugen
