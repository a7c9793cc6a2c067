#pragma once

// Variational operator learning loop: forward, masked Galerkin residual,
// strategy update (DM gradient or a few SD/CG steps giving a provisional
// label), parameter step through the model's reverse pass.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vol/fields.hpp"
#include "vol/matrix_free.hpp"
#include "vol/model.hpp"

namespace vol {

constexpr double kShiftStdFloor = 1e-8;

// Population mean/std per entry, std floored at `floor`.
ShiftStats compute_shift_stats(const std::vector<NodeField>& labels, double floor = kShiftStdFloor);

// Identity shift (mean 0, std 1), used when no shift set is wanted.
ShiftStats identity_shift(int channels, int rows, int cols);

// Euclidean norm of one masked residual, and the per-batch mean.
double dm_loss(const NodeField& masked_residual);
double dm_loss(const std::vector<NodeField>& masked_residuals);
// d ||R|| / d a = K R / ||R|| for R = Mask(K a - P); zero when R = 0.
NodeField dm_loss_gradient(const NodeField& masked_residual, const SystemOperator& op);

// 1/2 sum (a_hat - a)^2 and its cotangent with respect to a, -(a_hat - a).
double sse_loss(const NodeField& a_hat, const NodeField& a);
NodeField sse_cotangent(const NodeField& a_hat, const NodeField& a);

enum class StrategyKind { DM, SD, CG, Supervised };

struct Strategy {
  StrategyKind kind = StrategyKind::CG;
  int n = 2;

  // "dm", "supervised", "sd:N", "cg:N".
  static Strategy parse(const std::string& s);
  std::string to_string() const;
};

enum class OptimizerKind { Adam, Sgd };

std::string to_string(OptimizerKind k);
OptimizerKind optimizer_from_string(const std::string& s);

struct TrainConfig {
  int epochs = 100;
  int batch_size = 8;
  Strategy strategy;
  double learning_rate = 1e-3;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // Step decay: lr = lr0 * decay_factor^floor(epoch / decay_every);
  // decay_every = 0 means max(1, epochs / 5).
  int decay_every = 0;
  double decay_factor = 0.5;
  // Batches per epoch cap; 0 = full pass.
  int max_iterations_per_epoch = 0;
  std::uint64_t seed = 0;

  void validate() const;
  int decay_period() const;
  double lr_at(int epoch) const;
};

// Adam:  m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2;
//        theta <- theta - lr * (m / (1-b1^t)) / (sqrt(v / (1-b2^t)) + eps)
// SGD:   theta <- theta - lr * g
class Optimizer {
 public:
  Optimizer(const TrainConfig& cfg, std::size_t n_params);
  void step(std::vector<double>& params, const std::vector<double>& grad, double lr);
  long steps() const { return t_; }

 private:
  OptimizerKind kind_;
  double b1_, b2_, eps_;
  std::vector<double> m_, v_;
  long t_ = 0;
};

// One training input with the system it must satisfy. `label` is only read
// by the supervised strategy and may be empty otherwise.
struct TrainSample {
  Field3 input;
  std::shared_ptr<const SystemOperator> op;
  NodeField label;
};

struct IterationMetric {
  long iter = 0;
  int epoch = 0;
  double residual_norm = 0.0;  // batch mean of ||Mask(R)|| before the update
  double lr = 0.0;
};

struct EpochReport {
  int epoch = 0;
  double mean_residual_norm = 0.0;
  double wall_seconds = 0.0;
  int iterations = 0;
};

class Trainer {
 public:
  Trainer(OperatorModel& model, ShiftStats shift, TrainConfig cfg);

  EpochReport train_epoch(const std::vector<TrainSample>& data);
  std::vector<EpochReport> fit(const std::vector<TrainSample>& data);

  // Parameter gradient of one batch, exactly as used by train_epoch.
  std::vector<double> batch_gradient(const std::vector<TrainSample>& data, const std::vector<std::size_t>& batch,
                                     double* mean_residual_norm = nullptr) const;

  const std::vector<IterationMetric>& metrics() const { return metrics_; }
  const ShiftStats& shift() const { return shift_; }
  const TrainConfig& config() const { return cfg_; }
  int epoch() const { return epoch_; }

 private:
  OperatorModel& model_;
  ShiftStats shift_;
  TrainConfig cfg_;
  Optimizer opt_;
  std::vector<IterationMetric> metrics_;
  int epoch_ = 0;
  long iter_ = 0;
};

// Deterministic epoch order: Fisher-Yates driven by derive_seed(seed, epoch).
std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch);

struct EvalResult {
  double mean_rel_l2 = 0.0;
  double worst_rel_l2 = 0.0;
  std::vector<double> per_sample;
};

// Relative L2 over free entries against each sample's label.
EvalResult evaluate(const OperatorModel& model, const ShiftStats& shift, const std::vector<TrainSample>& data);

// Mean ||Mask(R)|| of the model predictions.
double mean_residual_norm(const OperatorModel& model, const ShiftStats& shift,
                          const std::vector<TrainSample>& data);

struct PowerLaw {
  double a = 0.0;
  double b = 0.0;
};

// Least squares on log y = log a + b log x.
PowerLaw fit_power_law(const std::vector<double>& sizes, const std::vector<double>& errors);

void write_metrics_csv(const std::vector<IterationMetric>& metrics, const std::string& path);

}  // namespace vol
