#include "vol/harness/experiments.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "vol/errors.hpp"
#include "vol/harness/array_file.hpp"
#include "vol/harness/random.hpp"
#include "vol/solvers.hpp"

namespace vol {

namespace fs = std::filesystem;

namespace {

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

void write_table(const ExperimentReport& r, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path.string());
  for (std::size_t i = 0; i < r.columns.size(); ++i) out << (i ? "," : "") << r.columns[i];
  out << "\n" << std::setprecision(17);
  for (const auto& row : r.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
    out << "\n";
  }
}

}  // namespace

ModelConfig model_config_from(const ConfigMap& c, const ModelConfig& base) {
  ModelConfig m = base;
  m.hidden_channels = c.get_int("model.hidden_channels", m.hidden_channels);
  m.n_layers = c.get_int("model.n_layers", m.n_layers);
  m.kernel_extent = c.get_int("model.kernel_extent", m.kernel_extent);
  m.spectral_modes = c.get_int("model.spectral_modes", m.spectral_modes);
  m.use_alignment = c.get_bool("model.use_alignment", m.use_alignment);
  m.activation = activation_from_string(c.get_string("model.activation", to_string(m.activation)));
  m.seed = c.get_u64("model.seed", m.seed);
  return m;
}

TrainConfig train_config_from(const ConfigMap& c, const TrainConfig& base) {
  TrainConfig t = base;
  t.epochs = c.get_int("train.epochs", t.epochs);
  t.batch_size = c.get_int("train.batch_size", t.batch_size);
  t.strategy = Strategy::parse(c.get_string("train.strategy", t.strategy.to_string()));
  t.learning_rate = c.get_double("train.learning_rate", t.learning_rate);
  t.optimizer = optimizer_from_string(c.get_string("train.optimizer", to_string(t.optimizer)));
  t.adam_beta1 = c.get_double("train.adam_beta1", t.adam_beta1);
  t.adam_beta2 = c.get_double("train.adam_beta2", t.adam_beta2);
  t.adam_eps = c.get_double("train.adam_eps", t.adam_eps);
  t.decay_every = c.get_int("train.decay_every", t.decay_every);
  t.decay_factor = c.get_double("train.decay_factor", t.decay_factor);
  t.max_iterations_per_epoch = c.get_int("train.max_iterations_per_epoch", t.max_iterations_per_epoch);
  t.seed = c.get_u64("train.seed", t.seed);
  t.validate();
  return t;
}

void echo_model_config(const ModelConfig& m, ConfigMap& out) {
  out.set("model.in_channels", std::to_string(m.in_channels));
  out.set("model.hidden_channels", std::to_string(m.hidden_channels));
  out.set("model.out_channels", std::to_string(m.out_channels));
  out.set("model.n_layers", std::to_string(m.n_layers));
  out.set("model.kernel_extent", std::to_string(m.kernel_extent));
  out.set("model.spectral_modes", std::to_string(m.spectral_modes));
  out.set("model.use_alignment", m.use_alignment ? "true" : "false");
  out.set("model.activation", to_string(m.activation));
  out.set("model.seed", std::to_string(m.seed));
  out.set("model.input_offset", num(m.input_offset));
  out.set("model.input_scale", num(m.input_scale));
  out.set("model.parameter_count", std::to_string(parameter_count(m)));
}

void echo_train_config(const TrainConfig& t, ConfigMap& out) {
  out.set("train.epochs", std::to_string(t.epochs));
  out.set("train.batch_size", std::to_string(t.batch_size));
  out.set("train.strategy", t.strategy.to_string());
  out.set("train.learning_rate", num(t.learning_rate));
  out.set("train.optimizer", to_string(t.optimizer));
  out.set("train.adam_beta1", num(t.adam_beta1));
  out.set("train.adam_beta2", num(t.adam_beta2));
  out.set("train.adam_eps", num(t.adam_eps));
  out.set("train.decay_every", std::to_string(t.decay_period()));
  out.set("train.decay_factor", num(t.decay_factor));
  out.set("train.max_iterations_per_epoch", std::to_string(t.max_iterations_per_epoch));
  out.set("train.seed", std::to_string(t.seed));
  out.set("train.shift_std_floor", num(kShiftStdFloor));
}

std::pair<double, double> input_standardization(const std::vector<TrainSample>& samples) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& s : samples)
    for (double v : s.input.data) {
      sum += v;
      sq += v * v;
      ++n;
    }
  if (n == 0) return {0.0, 1.0};
  const double mean = sum / double(n);
  const double sd = std::sqrt(std::max(0.0, sq / double(n) - mean * mean));
  return {mean, sd > 1e-12 ? 1.0 / sd : 1.0};
}

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "epoch,mean_rel_l2,worst_rel_l2\n" << std::setprecision(17);
  for (const auto& r : rows) out << r.epoch << ',' << r.mean_rel_l2 << ',' << r.worst_rel_l2 << '\n';
}

RunResult train_run(const Dataset& ds, ModelConfig mc, const TrainConfig& tc, const RunOptions& opt) {
  const auto t0 = std::chrono::steady_clock::now();
  const bool supervised = tc.strategy.kind == StrategyKind::Supervised;
  const auto train = make_samples(ds, ds.train, supervised);
  const auto test = ds.test.size() ? make_samples(ds, ds.test, true) : std::vector<TrainSample>{};
  if (train.empty()) throw InvalidArgument("training split is empty");
  mc.in_channels = train.front().input.channels;
  mc.out_channels = ds.disc->channels();
  mc.use_alignment = true;
  if (opt.standardize_inputs) std::tie(mc.input_offset, mc.input_scale) = input_standardization(train);

  RunResult res;
  res.shift = compute_shift_stats(ds.shift.labels);
  ConvOperatorModel model(mc);
  Trainer trainer(model, res.shift, tc);

  fs::path dir;
  if (!opt.run_dir.empty()) {
    dir = opt.run_dir;
    fs::create_directories(dir);
    ConfigMap echo = ds.spec.to_config();
    echo.set("provenance", "artifact-default");
    echo_model_config(mc, echo);
    echo_train_config(tc, echo);
    echo.set("run.eval_every", std::to_string(opt.eval_every));
    echo.set("run.checkpoint_every", std::to_string(opt.checkpoint_every));
    echo.save((dir / "config").string());
    write_array_file((dir / "shift_mean.volf").string(), stack_fields({res.shift.mean}));
    write_array_file((dir / "shift_std.volf").string(), stack_fields({res.shift.std}));
  }

  res.initial_residual = mean_residual_norm(model, res.shift, train);
  auto eval_now = [&](int epoch) {
    if (test.empty()) return;
    const EvalResult e = evaluate(model, res.shift, test);
    res.eval.push_back({epoch, e.mean_rel_l2, e.worst_rel_l2});
  };
  if (opt.eval_every > 0) eval_now(0);
  for (int e = 1; e <= tc.epochs; ++e) {
    res.epochs.push_back(trainer.train_epoch(train));
    if (opt.log)
      *opt.log << "  epoch " << e << "/" << tc.epochs << "  mean residual " << res.epochs.back().mean_residual_norm
               << "  (" << std::fixed << std::setprecision(2) << res.epochs.back().wall_seconds << "s)"
               << std::defaultfloat << std::setprecision(6) << "\n";
    if (opt.eval_every > 0 && e % opt.eval_every == 0 && e != tc.epochs) eval_now(e);
    if (!dir.empty() && opt.checkpoint_every > 0 && e % opt.checkpoint_every == 0 && e != tc.epochs) {
      ModelParams p = model.params();
      save_checkpoint(p, (dir / ("checkpoint_epoch" + std::to_string(e) + ".ckpt")).string());
    }
  }
  eval_now(tc.epochs);
  res.final_residual = mean_residual_norm(model, res.shift, train);
  res.metrics = trainer.metrics();
  res.params = model.params();
  res.train_seconds = seconds_since(t0);
  if (!dir.empty()) {
    write_metrics_csv(res.metrics, (dir / "metrics.csv").string());
    write_eval_csv(res.eval, (dir / "eval.csv").string());
    save_checkpoint(res.params, (dir / "final.ckpt").string());
  }
  return res;
}

std::string to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::Scaling: return "scaling";
    case ExperimentKind::Resolution: return "resolution";
    case ExperimentKind::Generalization: return "generalization";
    case ExperimentKind::StrategyCompare: return "strategy-compare";
  }
  return "?";
}

ExperimentKind experiment_from_string(const std::string& s) {
  if (s == "scaling") return ExperimentKind::Scaling;
  if (s == "resolution") return ExperimentKind::Resolution;
  if (s == "generalization") return ExperimentKind::Generalization;
  if (s == "strategy-compare") return ExperimentKind::StrategyCompare;
  throw InvalidArgument("unknown experiment '" + s + "'");
}

void ExperimentSpec::validate() const {
  data.validate();
  train.validate();
  model.validate();
  if (sizes.empty() || resolutions.empty() || strategies.empty()) throw InvalidArgument("experiment lists must be nonempty");
  for (int s : sizes)
    if (s < 1) throw InvalidArgument("training sizes must be >= 1");
  for (const auto& s : strategies) Strategy::parse(s);
  if (baseline_steps < 1) throw InvalidArgument("baseline steps must be >= 1");
}

ConfigMap ExperimentSpec::to_config() const {
  ConfigMap c = data.to_config();
  c.set("experiment", to_string(kind));
  echo_model_config(model, c);
  echo_train_config(train, c);
  c.set("sizes", join(sizes));
  c.set("resolutions", join(resolutions));
  std::string s;
  for (std::size_t i = 0; i < strategies.size(); ++i) s += (i ? "," : "") + strategies[i];
  c.set("strategies", s);
  c.set("baseline_steps", std::to_string(baseline_steps));
  c.set("provenance", "artifact-default");
  return c;
}

ExperimentSpec ExperimentSpec::from_config(const ConfigMap& c) {
  ExperimentSpec e;
  e.kind = experiment_from_string(c.get_string("experiment", to_string(e.kind)));
  e.data = DatasetSpec::from_config(c);
  e.model = model_config_from(c, e.model);
  e.train = train_config_from(c, e.train);
  e.sizes = c.get_int_list("sizes", e.sizes);
  e.resolutions = c.get_int_list("resolutions", e.resolutions);
  if (c.has("strategies")) {
    e.strategies.clear();
    std::istringstream ss(c.get_string("strategies", ""));
    std::string item;
    while (std::getline(ss, item, ','))
      if (!item.empty()) e.strategies.push_back(item);
  }
  e.baseline_steps = c.get_int("baseline_steps", e.baseline_steps);
  e.out_dir = c.get_string("out_dir", "");
  e.validate();
  return e;
}

double ExperimentReport::at(const std::string& key) const {
  const auto it = summary.find(key);
  if (it == summary.end()) throw InvalidArgument("report has no summary value '" + key + "'");
  return it->second;
}

namespace {

RunOptions sub_run(const ExperimentSpec& spec, const std::string& name, std::ostream* log) {
  RunOptions o;
  if (!spec.out_dir.empty()) o.run_dir = (fs::path(spec.out_dir) / name).string();
  o.log = log;
  return o;
}

ExperimentReport run_scaling(const ExperimentSpec& spec, std::ostream* log) {
  ExperimentReport r;
  r.kind = spec.kind;
  r.columns = {"size", "mean_rel_l2", "worst_rel_l2", "final_residual", "train_seconds"};
  DatasetSpec ds_spec = spec.data;
  ds_spec.n_train = *std::max_element(spec.sizes.begin(), spec.sizes.end());
  const Dataset full = generate_dataset(ds_spec);
  std::vector<double> xs, ys;
  for (int size : spec.sizes) {
    // Nested subsets: the first `size` training inputs.
    Dataset ds = full;
    ds.train.gauss.resize(std::size_t(size));
    ds.train.nodes.resize(std::size_t(size));
    if (ds.train.labeled()) ds.train.labels.resize(std::size_t(size));
    if (log) *log << "scaling: training size " << size << "\n";
    const RunResult run = train_run(ds, spec.model, spec.train, sub_run(spec, "size_" + std::to_string(size), nullptr));
    const EvalRow& e = run.eval.back();
    r.rows.push_back({double(size), e.mean_rel_l2, e.worst_rel_l2, run.final_residual, run.train_seconds});
    if (log) *log << "  test mean rel L2 " << e.mean_rel_l2 << "  worst " << e.worst_rel_l2 << "\n";
    xs.push_back(size);
    ys.push_back(e.mean_rel_l2);
  }
  if (xs.size() >= 3) {
    const PowerLaw fit = fit_power_law(xs, ys);
    r.summary["fit_a"] = fit.a;
    r.summary["fit_b"] = fit.b;
  }
  r.summary["error_first"] = ys.front();
  r.summary["error_last"] = ys.back();
  r.summary["error_ratio"] = ys.front() / ys.back();
  return r;
}

ExperimentReport run_resolution(const ExperimentSpec& spec, std::ostream* log) {
  ExperimentReport r;
  r.kind = spec.kind;
  r.columns = {"resolution", "parameter_count", "mean_rel_l2", "worst_rel_l2", "initial_residual",
               "final_residual", "train_seconds"};
  std::size_t first_count = 0;
  bool constant = true;
  for (int res : spec.resolutions) {
    DatasetSpec ds_spec = spec.data;
    ds_spec.resolution = res;
    if (log) *log << "resolution: " << res << "x" << res << " nodes\n";
    const Dataset ds = generate_dataset(ds_spec);
    const RunResult run = train_run(ds, spec.model, spec.train, sub_run(spec, "res_" + std::to_string(res), nullptr));
    const std::size_t count = run.params.values.size();
    if (first_count == 0) first_count = count;
    constant = constant && count == first_count;
    const EvalRow& e = run.eval.back();
    r.rows.push_back({double(res), double(count), e.mean_rel_l2, e.worst_rel_l2, run.initial_residual,
                      run.final_residual, run.train_seconds});
    if (log) *log << "  parameters " << count << "  test mean rel L2 " << e.mean_rel_l2 << "\n";
  }
  r.summary["parameter_count"] = double(first_count);
  r.summary["parameter_count_constant"] = constant ? 1.0 : 0.0;
  r.summary["completed_runs"] = double(r.rows.size());
  return r;
}

ExperimentReport run_generalization(const ExperimentSpec& spec, std::ostream* log) {
  ExperimentReport r;
  r.kind = spec.kind;
  const int n = spec.baseline_steps;
  r.columns = {"epoch", "vol_train_rel_l2", "cg_random_rel_l2", "cg_shift_mean_rel_l2"};
  DatasetSpec ds_spec = spec.data;
  ds_spec.label_train = true;
  const Dataset ds = generate_dataset(ds_spec);
  const auto train = make_samples(ds, ds.train, true);

  // VOL + CG(n), tracking train error every epoch.
  TrainConfig tc = spec.train;
  tc.strategy = {StrategyKind::CG, n};
  ModelConfig mc = spec.model;
  mc.in_channels = train.front().input.channels;
  mc.out_channels = ds.disc->channels();
  std::tie(mc.input_offset, mc.input_scale) = input_standardization(train);
  const ShiftStats shift = compute_shift_stats(ds.shift.labels);
  ConvOperatorModel model(mc);
  Trainer trainer(model, shift, tc);
  std::vector<double> vol{evaluate(model, shift, train).mean_rel_l2};
  if (log) *log << "generalization: VOL+CG(" << n << ") on " << train.size() << " samples\n";
  for (int e = 1; e <= tc.epochs; ++e) {
    trainer.train_epoch(train);
    vol.push_back(evaluate(model, shift, train).mean_rel_l2);
    if (log && (e % 10 == 0 || e == tc.epochs)) *log << "  epoch " << e << " train rel L2 " << vol.back() << "\n";
  }

  std::vector<const SystemOperator*> ops;
  std::vector<NodeField> refs;
  for (const auto& s : train) {
    ops.push_back(s.op.get());
    refs.push_back(s.label);
  }
  if (log) *log << "generalization: restarted CG(" << n << ") baselines\n";
  const BaselineResult cg_r = restarted_cg_baseline(ops, refs, n, tc.epochs, BaselineInit::RandomNormal, nullptr,
                                                    derive_seed(spec.data.seed, 0xba5e));
  const BaselineResult cg_a =
      restarted_cg_baseline(ops, refs, n, tc.epochs, BaselineInit::ShiftMean, &shift.mean, spec.data.seed);
  for (int e = 0; e <= tc.epochs; ++e)
    r.rows.push_back({double(e), vol[std::size_t(e)], cg_r.mean_rel_l2[std::size_t(e)], cg_a.mean_rel_l2[std::size_t(e)]});
  r.summary["vol_final"] = vol.back();
  r.summary["cg_random_final"] = cg_r.mean_rel_l2.back();
  r.summary["cg_shift_mean_final"] = cg_a.mean_rel_l2.back();
  r.summary["gap_ratio"] = cg_r.mean_rel_l2.back() / vol.back();
  if (!spec.out_dir.empty()) {
    const fs::path dir = fs::path(spec.out_dir) / "vol";
    fs::create_directories(dir);
    write_metrics_csv(trainer.metrics(), (dir / "metrics.csv").string());
    save_checkpoint(model.params(), (dir / "final.ckpt").string());
  }
  return r;
}

ExperimentReport run_strategy_compare(const ExperimentSpec& spec, std::ostream* log) {
  ExperimentReport r;
  r.kind = spec.kind;
  r.columns = {"strategy_index", "iter", "epoch", "residual_norm"};
  DatasetSpec ds_spec = spec.data;
  ds_spec.label_train = true;
  const Dataset ds = generate_dataset(ds_spec);
  for (std::size_t k = 0; k < spec.strategies.size(); ++k) {
    TrainConfig tc = spec.train;
    tc.strategy = Strategy::parse(spec.strategies[k]);
    std::string name = tc.strategy.to_string();
    std::replace(name.begin(), name.end(), ':', '_');
    if (log) *log << "strategy-compare: " << tc.strategy.to_string() << "\n";
    const RunResult run = train_run(ds, spec.model, tc, sub_run(spec, name, nullptr));
    for (const auto& m : run.metrics) r.rows.push_back({double(k), double(m.iter), double(m.epoch), m.residual_norm});
    r.summary[name + ".initial_residual"] = run.initial_residual;
    r.summary[name + ".final_residual"] = run.final_residual;
    r.summary[name + ".reduction"] = run.initial_residual / run.final_residual;
    r.summary[name + ".test_mean_rel_l2"] = run.eval.empty() ? 0.0 : run.eval.back().mean_rel_l2;
    r.summary[name + ".iterations"] = double(run.metrics.size());
    if (log)
      *log << "  residual " << run.initial_residual << " -> " << run.final_residual << "  test rel L2 "
           << r.summary[name + ".test_mean_rel_l2"] << "\n";
  }
  return r;
}

}  // namespace

ExperimentReport run_experiment(const ExperimentSpec& spec, std::ostream* log) {
  spec.validate();
  if (!spec.out_dir.empty()) {
    fs::create_directories(spec.out_dir);
    spec.to_config().save((fs::path(spec.out_dir) / "config").string());
  }
  ExperimentReport r;
  switch (spec.kind) {
    case ExperimentKind::Scaling: r = run_scaling(spec, log); break;
    case ExperimentKind::Resolution: r = run_resolution(spec, log); break;
    case ExperimentKind::Generalization: r = run_generalization(spec, log); break;
    case ExperimentKind::StrategyCompare: r = run_strategy_compare(spec, log); break;
  }
  if (!spec.out_dir.empty()) {
    write_table(r, fs::path(spec.out_dir) / "table.csv");
    ConfigMap summary;
    for (const auto& [k, v] : r.summary) summary.set(k, num(v));
    summary.save((fs::path(spec.out_dir) / "summary").string());
  }
  return r;
}

}  // namespace vol
