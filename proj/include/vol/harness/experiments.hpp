#pragma once

// Experiment drivers: single training runs with a run directory, and the
// four experiment families (data scaling, resolution reuse, generalization
// against restarted CG, strategy comparison).

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "vol/harness/config.hpp"
#include "vol/harness/dataset.hpp"
#include "vol/model.hpp"
#include "vol/training.hpp"

namespace vol {

// Config keys under "model." and "train." prefixes; missing keys keep the
// struct defaults.
ModelConfig model_config_from(const ConfigMap& c, const ModelConfig& base = {});
TrainConfig train_config_from(const ConfigMap& c, const TrainConfig& base = {});
void echo_model_config(const ModelConfig& m, ConfigMap& out);
void echo_train_config(const TrainConfig& t, ConfigMap& out);

// Mean/std of every input value of the samples, as (offset, 1/std).
std::pair<double, double> input_standardization(const std::vector<TrainSample>& samples);

struct EvalRow {
  int epoch = 0;
  double mean_rel_l2 = 0.0;
  double worst_rel_l2 = 0.0;
};

struct RunOptions {
  std::string run_dir;       // empty: nothing written
  int eval_every = 0;        // epochs between test evaluations; 0 = final only
  int checkpoint_every = 0;  // epochs between checkpoints; 0 = final only
  bool standardize_inputs = true;
  std::ostream* log = nullptr;
};

struct RunResult {
  ModelParams params;
  ShiftStats shift;
  std::vector<EpochReport> epochs;
  std::vector<IterationMetric> metrics;
  std::vector<EvalRow> eval;
  double initial_residual = 0.0;  // mean ||Mask(R)|| over the training set before iteration 1
  double final_residual = 0.0;    // same after the last iteration
  double train_seconds = 0.0;
};

// Trains a fresh model on ds.train (labels used only by the supervised
// strategy) with shift statistics from ds.shift, evaluating on ds.test.
RunResult train_run(const Dataset& ds, ModelConfig model_cfg, const TrainConfig& train_cfg, const RunOptions& opt);

void write_eval_csv(const std::vector<EvalRow>& rows, const std::string& path);

enum class ExperimentKind { Scaling, Resolution, Generalization, StrategyCompare };

std::string to_string(ExperimentKind k);
ExperimentKind experiment_from_string(const std::string& s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::Scaling;
  DatasetSpec data;
  ModelConfig model;
  TrainConfig train;
  std::vector<int> sizes = {50, 100, 200, 400};
  std::vector<int> resolutions = {17, 33, 65};
  std::vector<std::string> strategies = {"supervised", "dm", "cg:2"};
  int baseline_steps = 2;  // n of the restarted CG(n) baselines
  std::string out_dir;

  void validate() const;
  ConfigMap to_config() const;
  static ExperimentSpec from_config(const ConfigMap& c);
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::Scaling;
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::map<std::string, double> summary;

  double at(const std::string& key) const;
};

// Runs the experiment and, if spec.out_dir is set, writes config, table.csv,
// summary and per-run subdirectories there.
ExperimentReport run_experiment(const ExperimentSpec& spec, std::ostream* log = nullptr);

}  // namespace vol
