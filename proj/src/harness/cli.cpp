#include "vol/harness/cli.hpp"

#include <filesystem>
#include <fstream>
#include <optional>
#include <iomanip>
#include <iostream>

#include <CLI11.hpp>

#include "vol/errors.hpp"
#include "vol/harness/array_file.hpp"
#include "vol/harness/dataset.hpp"
#include "vol/harness/diagnostics.hpp"
#include "vol/harness/experiments.hpp"
#include "vol/harness/random.hpp"
#include "vol/solvers.hpp"

namespace vol {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

// Flags shared by most subcommands; unset values leave the config alone.
struct CommonFlags {
  std::string config;
  std::string out;
  std::string problem;
  std::string strategy;
  std::optional<std::uint64_t> seed;
  std::optional<int> resolution;

  ConfigMap load() const {
    ConfigMap c = config.empty() ? ConfigMap{} : ConfigMap::load(config);
    if (!problem.empty()) c.set("problem", to_string(problem_from_string(problem)));
    if (seed) c.set("seed", std::to_string(*seed));
    if (resolution) c.set("resolution", std::to_string(*resolution));
    if (!strategy.empty()) c.set("train.strategy", Strategy::parse(strategy).to_string());
    return c;
  }
};

void add_common(CLI::App* app, CommonFlags& f, bool with_strategy) {
  app->add_option("--config", f.config, "key = value configuration file");
  app->add_option("--out", f.out, "output path");
  app->add_option("--problem", f.problem, "heat | darcy | elasticity-a | elasticity-b");
  app->add_option("--seed", f.seed, "master seed");
  app->add_option("--resolution", f.resolution, "nodes per side");
  if (with_strategy) app->add_option("--strategy", f.strategy, "dm | supervised | sd:N | cg:N");
}

int cmd_gen_data(const CommonFlags& f) {
  if (f.out.empty()) throw InvalidArgument("gen-data needs --out <directory>");
  const DatasetSpec spec = DatasetSpec::from_config(f.load());
  std::cout << "generating " << to_string(spec.problem) << " dataset at " << spec.resolution << "x" << spec.resolution
            << " nodes: " << spec.n_train << " train, " << spec.n_shift << " shift, " << spec.n_test << " test\n";
  save_dataset(generate_dataset(spec), f.out);
  std::cout << "wrote " << f.out << "\n";
  return kExitOk;
}

int cmd_train(const CommonFlags& f, const std::string& data_dir, int eval_every, int checkpoint_every) {
  if (f.out.empty()) throw InvalidArgument("train needs --out <run directory>");
  const ConfigMap c = f.load();
  const Dataset ds = data_dir.empty() ? generate_dataset(DatasetSpec::from_config(c)) : load_dataset(data_dir);
  RunOptions opt;
  opt.run_dir = f.out;
  opt.eval_every = eval_every;
  opt.checkpoint_every = checkpoint_every;
  opt.log = &std::cout;
  const RunResult r = train_run(ds, model_config_from(c), train_config_from(c), opt);
  std::cout << "mean residual " << r.initial_residual << " -> " << r.final_residual << "\n";
  if (!r.eval.empty())
    std::cout << "test mean rel L2 " << r.eval.back().mean_rel_l2 << ", worst " << r.eval.back().worst_rel_l2 << "\n";
  std::cout << "run directory " << f.out << "\n";
  return kExitOk;
}

int cmd_evaluate(const std::string& run_dir, const std::string& data_dir) {
  if (run_dir.empty() || data_dir.empty()) throw InvalidArgument("evaluate needs --run <dir> and --data <dir>");
  const fs::path run(run_dir);
  const ModelParams params = load_checkpoint((run / "final.ckpt").string());
  auto load_node = [&](const char* name) {
    const auto f = unstack_fields(read_array_file((run / name).string())).at(0);
    NodeField n(f.channels, f.rows, f.cols);
    n.data = f.data;
    return n;
  };
  const ShiftStats shift{load_node("shift_mean.volf"), load_node("shift_std.volf")};
  const Dataset ds = load_dataset(data_dir);
  const ConvOperatorModel model(params);
  const EvalResult e = evaluate(model, shift, make_samples(ds, ds.test, true));
  std::cout << std::setprecision(6) << "test samples " << e.per_sample.size() << "\nmean rel L2 " << e.mean_rel_l2
            << "\nworst rel L2 " << e.worst_rel_l2 << "\n";
  return kExitOk;
}

int cmd_solve(const CommonFlags& f, double tol) {
  const DatasetSpec spec = DatasetSpec::from_config(f.load());
  const auto disc = make_discretization(default_grid(spec.problem, spec.resolution, spec.problem_cfg),
                                        physics_of(spec.problem), spec.gauss_order);
  const auto param = sample_input(spec, disc->grid, spec.seed, Sampling::GaussPoints);
  const SystemOperator op(problem_factory(spec.problem, disc, param, spec.problem_cfg));
  const SolveResult s = cg_solve(op, apply_shift_bc(op.zeros(), op.mask()), tol);
  const double pn = norm2(apply_mask(op.load(), op.mask()));
  const double rn = norm2(op.masked_residual(s.solution));
  std::cout << std::setprecision(6) << to_string(spec.problem) << " " << spec.resolution << "x" << spec.resolution
            << ": " << s.report.iterations() << " CG iterations, relative residual " << rn / (pn > 0 ? pn : 1.0)
            << ", " << s.report.wall_seconds << " s\n";
  if (!f.out.empty()) {
    fs::create_directories(f.out);
    write_array_file((fs::path(f.out) / "solution.volf").string(), stack_fields({s.solution}));
    write_array_file((fs::path(f.out) / "input.volf").string(), stack_fields({param.values}));
    write_report_csv(s.report, (fs::path(f.out) / "cg_report.csv").string());
  }
  return s.report.converged ? kExitOk : kExitNumerical;
}

int cmd_compare_cg(const CommonFlags& f, int epochs, int n_samples) {
  ConfigMap c = f.load();
  const Strategy st = Strategy::parse(c.get_string("train.strategy", "cg:2"));
  if (st.kind != StrategyKind::CG) throw InvalidArgument("compare-cg needs --strategy cg:N");
  DatasetSpec spec = DatasetSpec::from_config(c);
  spec.n_train = n_samples;
  spec.label_train = true;
  spec.n_test = 0;
  const Dataset ds = generate_dataset(spec);
  const auto samples = make_samples(ds, ds.train, true);
  const ShiftStats shift = compute_shift_stats(ds.shift.labels);
  std::vector<const SystemOperator*> ops;
  std::vector<NodeField> refs;
  for (const auto& s : samples) {
    ops.push_back(s.op.get());
    refs.push_back(s.label);
  }
  const auto r = restarted_cg_baseline(ops, refs, st.n, epochs, BaselineInit::RandomNormal, nullptr, spec.seed);
  const auto a = restarted_cg_baseline(ops, refs, st.n, epochs, BaselineInit::ShiftMean, &shift.mean, spec.seed);
  std::ostream* out = &std::cout;
  std::ofstream file;
  if (!f.out.empty()) {
    file.open(f.out);
    if (!file) throw FormatError("cannot write " + f.out);
    out = &file;
  }
  *out << "epoch,cg_random_mean_rel_l2,cg_random_worst_rel_l2,cg_shift_mean_mean_rel_l2,cg_shift_mean_worst_rel_l2\n"
       << std::setprecision(10);
  for (int e = 0; e <= epochs; ++e)
    *out << e << ',' << r.mean_rel_l2[e] << ',' << r.worst_rel_l2[e] << ',' << a.mean_rel_l2[e] << ','
         << a.worst_rel_l2[e] << '\n';
  return kExitOk;
}

int cmd_grad_check(const CommonFlags& f) {
  const GradCheckResult g = gradient_check(f.seed.value_or(0));
  const double worst = std::max(g.model_max_rel, g.dm_max_rel);
  std::cout << std::setprecision(3) << "model vjp max relative error " << g.model_max_rel
            << "\ndm loss gradient max relative error " << g.dm_max_rel << "\nmax relative gradient error " << worst
            << "\n";
  return worst < 1e-4 ? kExitOk : kExitNumerical;
}

int cmd_oracle_check(const CommonFlags& f, int n_inputs) {
  const ConfigMap c = f.load();
  const ProblemKind kind = problem_from_string(c.get_string("problem", "heat"));
  const int res = c.get_int("resolution", 9);
  const OracleDiscrepancy d = oracle_check(kind, res, n_inputs, c.get_u64("seed", 0));
  std::cout << std::setprecision(3) << to_string(kind) << " " << res << "x" << res << " nodes, " << n_inputs
            << " inputs\n  residual   " << d.residual << "\n  matvec     " << d.matvec << "\n  load       "
            << d.load << "\n  functional " << d.functional << "\nmax relative discrepancy " << d.max() << "\n";
  return d.max() < 1e-10 ? kExitOk : kExitNumerical;
}

int cmd_run_experiment(const CommonFlags& f, const std::string& kind) {
  ConfigMap c = f.load();
  if (!kind.empty()) c.set("experiment", kind);
  if (!f.out.empty()) c.set("out_dir", f.out);
  const ExperimentSpec spec = ExperimentSpec::from_config(c);
  const ExperimentReport r = run_experiment(spec, &std::cout);
  std::cout << "summary\n";
  for (const auto& [k, v] : r.summary) std::cout << "  " << k << " = " << v << "\n";
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Variational operator learning: matrix-free FEM residuals as the training signal"};
  app.require_subcommand(1);
  CommonFlags common;

  auto* gen = app.add_subcommand("gen-data", "generate a dataset directory");
  add_common(gen, common, false);

  auto* train = app.add_subcommand("train", "train a model and write a run directory");
  add_common(train, common, true);
  std::string data_dir;
  int eval_every = 10, checkpoint_every = 0;
  train->add_option("--data", data_dir, "dataset directory (generated from the config if omitted)");
  train->add_option("--eval-every", eval_every, "epochs between test evaluations");
  train->add_option("--checkpoint-every", checkpoint_every, "epochs between checkpoints");

  auto* eval = app.add_subcommand("evaluate", "evaluate a trained run on a dataset's test split");
  std::string run_dir;
  eval->add_option("--run", run_dir, "run directory written by train")->required();
  eval->add_option("--data", data_dir, "dataset directory")->required();

  auto* solve = app.add_subcommand("solve", "solve one sampled problem with matrix-free CG");
  add_common(solve, common, false);
  double tol = 1e-10;
  solve->add_option("--tol", tol, "relative residual tolerance");

  auto* compare = app.add_subcommand("compare-cg", "restarted CG(n) baselines from random and shift-mean starts");
  add_common(compare, common, true);
  int epochs = 50, n_samples = 20;
  compare->add_option("--epochs", epochs, "restart rounds");
  compare->add_option("--samples", n_samples, "number of problems");

  auto* grad = app.add_subcommand("grad-check", "reverse-mode gradients vs. central differences");
  grad->add_option("--seed", common.seed, "seed");

  auto* oracle = app.add_subcommand("oracle-check", "matrix-free operators vs. dense assembly");
  add_common(oracle, common, false);
  int n_inputs = 5;
  oracle->add_option("--inputs", n_inputs, "random inputs to test");

  auto* experiment = app.add_subcommand("run-experiment", "scaling | resolution | generalization | strategy-compare");
  add_common(experiment, common, true);
  std::string kind;
  experiment->add_option("--kind", kind, "experiment kind (overrides the config)");

  if (argc <= 1) {
    std::cerr << app.help();
    return kExitUsage;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*gen) return cmd_gen_data(common);
    if (*train) return cmd_train(common, data_dir, eval_every, checkpoint_every);
    if (*eval) return cmd_evaluate(run_dir, data_dir);
    if (*solve) return cmd_solve(common, tol);
    if (*compare) return cmd_compare_cg(common, epochs, n_samples);
    if (*grad) return cmd_grad_check(common);
    if (*oracle) return cmd_oracle_check(common, n_inputs);
    if (*experiment) return cmd_run_experiment(common, kind);
  } catch (const SolverBreakdown& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace vol
