#include "vol/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>

#include "vol/errors.hpp"
#include "vol/harness/random.hpp"
#include "vol/solvers.hpp"

namespace vol {

ShiftStats compute_shift_stats(const std::vector<NodeField>& labels, double floor) {
  if (labels.empty()) throw InvalidArgument("shift set is empty");
  if (labels.size() < 2) throw InvalidArgument("shift statistics need at least 2 labels");
  if (!(floor > 0.0)) throw InvalidArgument("std floor must be positive");
  const NodeField& l0 = labels.front();
  ShiftStats s{NodeField(l0.channels, l0.rows, l0.cols), NodeField(l0.channels, l0.rows, l0.cols)};
  const double n = double(labels.size());
  for (const auto& l : labels) {
    require_same_shape(l0, l, "shift set");
    axpy(1.0 / n, l, s.mean);
  }
  for (const auto& l : labels)
    for (std::size_t i = 0; i < l.size(); ++i) {
      const double d = l.data[i] - s.mean.data[i];
      s.std.data[i] += d * d / n;
    }
  for (double& v : s.std.data) v = std::max(std::sqrt(v), floor);
  return s;
}

ShiftStats identity_shift(int channels, int rows, int cols) {
  return {NodeField(channels, rows, cols, 0.0), NodeField(channels, rows, cols, 1.0)};
}

double dm_loss(const NodeField& r) { return norm2(r); }

double dm_loss(const std::vector<NodeField>& rs) {
  if (rs.empty()) return 0.0;
  double s = 0.0;
  for (const auto& r : rs) s += norm2(r);
  return s / double(rs.size());
}

NodeField dm_loss_gradient(const NodeField& r, const SystemOperator& op) {
  const double nr = norm2(r);
  if (nr == 0.0) return op.zeros();
  NodeField g = op.matvec(r);
  scale(g, 1.0 / nr);
  return g;
}

double sse_loss(const NodeField& a_hat, const NodeField& a) {
  require_same_shape(a_hat, a, "sse_loss");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a_hat.data[i] - a.data[i];
    s += d * d;
  }
  return 0.5 * s;
}

NodeField sse_cotangent(const NodeField& a_hat, const NodeField& a) {
  require_same_shape(a_hat, a, "sse_cotangent");
  NodeField c = a;
  axpy(-1.0, a_hat, c);
  return c;
}

Strategy Strategy::parse(const std::string& s) {
  if (s == "dm") return {StrategyKind::DM, 1};
  if (s == "supervised") return {StrategyKind::Supervised, 1};
  const auto colon = s.find(':');
  if (colon != std::string::npos) {
    const std::string head = s.substr(0, colon), tail = s.substr(colon + 1);
    int n = 0;
    try {
      std::size_t used = 0;
      n = std::stoi(tail, &used);
      if (used != tail.size()) n = 0;
    } catch (const std::exception&) {
      n = 0;
    }
    if (n >= 1 && head == "sd") return {StrategyKind::SD, n};
    if (n >= 1 && head == "cg") return {StrategyKind::CG, n};
  }
  throw InvalidArgument("unknown strategy '" + s + "' (expected dm, supervised, sd:N or cg:N)");
}

std::string Strategy::to_string() const {
  switch (kind) {
    case StrategyKind::DM: return "dm";
    case StrategyKind::Supervised: return "supervised";
    case StrategyKind::SD: return "sd:" + std::to_string(n);
    case StrategyKind::CG: return "cg:" + std::to_string(n);
  }
  return "?";
}

std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw InvalidArgument("unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw InvalidArgument("epochs must be >= 0");
  if (batch_size < 1) throw InvalidArgument("batch size must be >= 1");
  if ((strategy.kind == StrategyKind::SD || strategy.kind == StrategyKind::CG) && strategy.n < 1)
    throw InvalidArgument("iterative strategies need n >= 1");
  if (!(learning_rate > 0.0)) throw InvalidArgument("learning rate must be positive");
  if (!(decay_factor > 0.0)) throw InvalidArgument("decay factor must be positive");
  if (decay_every < 0 || max_iterations_per_epoch < 0) throw InvalidArgument("negative schedule setting");
}

int TrainConfig::decay_period() const { return decay_every > 0 ? decay_every : std::max(1, epochs / 5); }

double TrainConfig::lr_at(int epoch) const {
  return learning_rate * std::pow(decay_factor, double(epoch / decay_period()));
}

Optimizer::Optimizer(const TrainConfig& cfg, std::size_t n)
    : kind_(cfg.optimizer), b1_(cfg.adam_beta1), b2_(cfg.adam_beta2), eps_(cfg.adam_eps) {
  if (kind_ == OptimizerKind::Adam) {
    m_.assign(n, 0.0);
    v_.assign(n, 0.0);
  }
}

void Optimizer::step(std::vector<double>& p, const std::vector<double>& g, double lr) {
  if (p.size() != g.size()) throw ShapeMismatch("optimizer: gradient size mismatch");
  ++t_;
  if (kind_ == OptimizerKind::Sgd) {
    for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    return;
  }
  if (m_.size() != p.size()) throw ShapeMismatch("optimizer: parameter count changed");
  const double c1 = 1.0 - std::pow(b1_, double(t_)), c2 = 1.0 - std::pow(b2_, double(t_));
  for (std::size_t i = 0; i < p.size(); ++i) {
    m_[i] = b1_ * m_[i] + (1.0 - b1_) * g[i];
    v_[i] = b2_ * v_[i] + (1.0 - b2_) * g[i] * g[i];
    p[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + eps_);
  }
}

std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, int epoch) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  CounterRng rng(derive_seed(seed, std::uint64_t(epoch)));
  for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.next_u64() % i]);
  return idx;
}

Trainer::Trainer(OperatorModel& model, ShiftStats shift, TrainConfig cfg)
    : model_(model), shift_(std::move(shift)), cfg_(cfg), opt_(cfg, model.parameters().size()) {
  cfg_.validate();
  for (double s : shift_.std.data)
    if (!(s > 0.0)) throw InvalidArgument("shift std must be positive everywhere");
}

std::vector<double> Trainer::batch_gradient(const std::vector<TrainSample>& data,
                                            const std::vector<std::size_t>& batch, double* mean_rn) const {
  std::vector<double> grad(model_.parameters().size(), 0.0);
  const double inv_bs = 1.0 / double(batch.size());
  double rn_sum = 0.0;
  for (std::size_t idx : batch) {
    const TrainSample& s = data[idx];
    const SystemOperator& op = *s.op;
    ForwardResult fw = model_.forward(s.input, op.mask(), shift_);
    if (!all_finite(fw.output)) throw SolverBreakdown("non-finite model output", long(idx));
    const NodeField r = op.masked_residual(fw.output);
    rn_sum += norm2(r);
    NodeField cot;
    try {
      switch (cfg_.strategy.kind) {
        case StrategyKind::DM: cot = dm_loss_gradient(r, op); break;
        case StrategyKind::SD:
        case StrategyKind::CG: break;
        case StrategyKind::Supervised:
          if (s.label.size() == 0) throw InvalidArgument("supervised strategy needs labels");
          cot = fw.output;
          axpy(-1.0, s.label, cot);
          break;
      }
      if (cfg_.strategy.kind == StrategyKind::SD || cfg_.strategy.kind == StrategyKind::CG) {
        // Provisional label a_hat = a + delta; the SSE cotangent on a is -delta.
        UpdateResult u = cfg_.strategy.kind == StrategyKind::SD ? sd_steps(r, fw.output, op, cfg_.strategy.n)
                                                                 : cg_steps(r, fw.output, op, cfg_.strategy.n);
        cot = std::move(u.delta);
        scale(cot, -1.0);
      }
    } catch (const SolverBreakdown& e) {
      throw SolverBreakdown(e.what(), long(idx));
    }
    const std::vector<double> g = model_.vjp(fw.tape, cot);
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += inv_bs * g[i];
  }
  if (mean_rn) *mean_rn = rn_sum * inv_bs;
  return grad;
}

EpochReport Trainer::train_epoch(const std::vector<TrainSample>& data) {
  if (data.empty()) throw InvalidArgument("training set is empty");
  const auto t0 = std::chrono::steady_clock::now();
  const double lr = cfg_.lr_at(epoch_);
  const auto order = epoch_permutation(data.size(), cfg_.seed, epoch_);
  EpochReport rep;
  rep.epoch = epoch_;
  double rn_total = 0.0;
  const std::size_t bs = std::size_t(cfg_.batch_size);
  for (std::size_t start = 0; start < order.size(); start += bs) {
    if (cfg_.max_iterations_per_epoch > 0 && rep.iterations >= cfg_.max_iterations_per_epoch) break;
    const std::vector<std::size_t> batch(order.begin() + start, order.begin() + std::min(order.size(), start + bs));
    double rn = 0.0;
    const auto grad = batch_gradient(data, batch, &rn);
    opt_.step(model_.parameters(), grad, lr);
    metrics_.push_back({++iter_, epoch_, rn, lr});
    rn_total += rn;
    ++rep.iterations;
  }
  rep.mean_residual_norm = rep.iterations ? rn_total / rep.iterations : 0.0;
  rep.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  ++epoch_;
  return rep;
}

std::vector<EpochReport> Trainer::fit(const std::vector<TrainSample>& data) {
  std::vector<EpochReport> out;
  while (epoch_ < cfg_.epochs) out.push_back(train_epoch(data));
  return out;
}

EvalResult evaluate(const OperatorModel& model, const ShiftStats& shift, const std::vector<TrainSample>& data) {
  EvalResult res;
  for (const auto& s : data) {
    if (s.label.size() == 0) throw InvalidArgument("evaluation needs labeled samples");
    const ForwardResult fw = model.forward(s.input, s.op->mask(), shift);
    res.per_sample.push_back(relative_l2(fw.output, s.label, s.op->mask()));
  }
  for (double e : res.per_sample) {
    res.mean_rel_l2 += e;
    res.worst_rel_l2 = std::max(res.worst_rel_l2, e);
  }
  if (!data.empty()) res.mean_rel_l2 /= double(data.size());
  return res;
}

double mean_residual_norm(const OperatorModel& model, const ShiftStats& shift, const std::vector<TrainSample>& data) {
  if (data.empty()) return 0.0;
  double s = 0.0;
  for (const auto& d : data) s += norm2(d.op->masked_residual(model.forward(d.input, d.op->mask(), shift).output));
  return s / double(data.size());
}

PowerLaw fit_power_law(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw ShapeMismatch("power-law fit: size mismatch");
  if (x.size() < 3) throw InvalidArgument("power-law fit needs at least 3 points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double n = double(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw InvalidArgument("power-law fit needs positive values");
    const double lx = std::log(x[i]), ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  const double den = n * sxx - sx * sx;
  if (!(std::abs(den) > 0.0)) throw InvalidArgument("power-law fit needs distinct sizes");
  const double b = (n * sxy - sx * sy) / den;
  return {std::exp((sy - b * sx) / n), b};
}

void write_metrics_csv(const std::vector<IterationMetric>& metrics, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "iter,epoch,residual_norm,lr\n" << std::setprecision(17);
  for (const auto& m : metrics) out << m.iter << ',' << m.epoch << ',' << m.residual_norm << ',' << m.lr << '\n';
}

}  // namespace vol
