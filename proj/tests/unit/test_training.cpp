#include <doctest.h>

#include <cmath>
#include <numeric>
#include <set>

#include "helpers.hpp"
#include "vol/errors.hpp"
#include "vol/harness/dataset.hpp"
#include "vol/harness/experiments.hpp"
#include "vol/solvers.hpp"
#include "vol/training.hpp"

using namespace vol;

namespace {

std::vector<TrainSample> heat_samples(int nodes, int n, std::uint64_t seed) {
  std::vector<TrainSample> out;
  for (int i = 0; i < n; ++i) {
    const Problem p = test::random_problem(ProblemKind::Heat, nodes, seed + i);
    TrainSample s;
    s.op = std::make_shared<SystemOperator>(p);
    s.input = Field3(4, nodes - 1, nodes - 1);
    s.input.data = p.load.volumetric.data;
    s.label = cg_solve(*s.op, s.op->zeros(), 1e-12).solution;
    out.push_back(std::move(s));
  }
  return out;
}

ModelConfig tiny_model(int nodes) {
  ModelConfig c;
  c.hidden_channels = 6;
  c.n_layers = 2;
  c.kernel_extent = 3;
  c.spectral_modes = nodes >= 9 ? 2 : 0;
  c.seed = 7;
  return c;
}

}  // namespace

TEST_CASE("shift statistics") {
  NodeField a(1, 1, 3), b(1, 1, 3);
  a.data = {1.0, 5.0, -2.0};
  b.data = {3.0, 5.0, 2.0};
  const ShiftStats s = compute_shift_stats({a, b});
  CHECK(s.mean.data == std::vector<double>{2.0, 5.0, 0.0});
  CHECK(s.std.data[0] == doctest::Approx(1.0));
  CHECK(s.std.data[1] == kShiftStdFloor);
  CHECK(s.std.data[2] == doctest::Approx(2.0));
  CHECK_THROWS_AS(compute_shift_stats({a}), InvalidArgument);
  CHECK_THROWS_AS(compute_shift_stats({a, NodeField(1, 1, 4)}), ShapeMismatch);
  const ShiftStats id = identity_shift(2, 3, 4);
  CHECK(id.mean.size() == 24);
  CHECK(id.std.data[5] == 1.0);
}

TEST_CASE("losses and their derivatives") {
  const SystemOperator op(test::random_problem(ProblemKind::Darcy, 6, 2));
  const NodeField a = test::random_nodes(1, 6, 6, 3);
  const NodeField r = op.masked_residual(a);
  NodeField r3 = r;
  scale(r3, -3.0);
  CHECK(dm_loss(r3) == doctest::Approx(3.0 * dm_loss(r)).epsilon(1e-15));
  CHECK(dm_loss(std::vector<NodeField>{r, r3}) == doctest::Approx(2.0 * dm_loss(r)).epsilon(1e-15));
  CHECK(norm2(dm_loss_gradient(op.zeros(), op)) == 0.0);

  const NodeField g = dm_loss_gradient(r, op);
  const double h = 1e-6;
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    NodeField ap = a, am = a;
    ap.data[i] += h;
    am.data[i] -= h;
    const double fd = (dm_loss(op.masked_residual(ap)) - dm_loss(op.masked_residual(am))) / (2 * h);
    worst = std::max(worst, std::abs(fd - g.data[i]) / std::max({std::abs(fd), std::abs(g.data[i]), 1e-6}));
  }
  CHECK(worst < 1e-4);

  NodeField x(1, 1, 3), y(1, 1, 3);
  x.data = {1, 2, 3};
  y.data = {0, 2, 5};
  CHECK(sse_loss(x, y) == doctest::Approx(0.5 * (1 + 0 + 4)));
  // Derivative of the loss with respect to the second argument (the prediction).
  CHECK(sse_cotangent(x, y).data == std::vector<double>{-1, 0, 2});
}

TEST_CASE("strategy and optimizer names") {
  CHECK(Strategy::parse("dm").kind == StrategyKind::DM);
  CHECK(Strategy::parse("supervised").kind == StrategyKind::Supervised);
  const Strategy s = Strategy::parse("sd:3");
  CHECK(s.kind == StrategyKind::SD);
  CHECK(s.n == 3);
  CHECK(Strategy::parse("cg:12").n == 12);
  CHECK(Strategy::parse("cg:2").to_string() == "cg:2");
  for (const char* bad : {"cg", "cg:0", "cg:x", "newton", "sd:-1", ""}) CHECK_THROWS_AS(Strategy::parse(bad), InvalidArgument);
  CHECK(optimizer_from_string(to_string(OptimizerKind::Sgd)) == OptimizerKind::Sgd);
}

TEST_CASE("learning-rate schedule and epoch order") {
  TrainConfig c;
  c.epochs = 100;
  c.learning_rate = 0.1;
  CHECK(c.decay_period() == 20);
  CHECK(c.lr_at(0) == doctest::Approx(0.1));
  CHECK(c.lr_at(19) == doctest::Approx(0.1));
  CHECK(c.lr_at(20) == doctest::Approx(0.05));
  CHECK(c.lr_at(99) == doctest::Approx(0.1 / 16));
  c.epochs = 3;
  CHECK(c.decay_period() == 1);
  c.batch_size = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);

  const auto p0 = epoch_permutation(50, 9, 0), p0b = epoch_permutation(50, 9, 0), p1 = epoch_permutation(50, 9, 1);
  CHECK(p0 == p0b);
  CHECK(p0 != p1);
  CHECK(std::set<std::size_t>(p1.begin(), p1.end()).size() == 50);
}

TEST_CASE("optimizer steps") {
  TrainConfig c;
  c.optimizer = OptimizerKind::Sgd;
  Optimizer sgd(c, 2);
  std::vector<double> th{1.0, 2.0};
  sgd.step(th, {0.5, -1.0}, 0.1);
  CHECK(th[0] == doctest::Approx(0.95));
  CHECK(th[1] == doctest::Approx(2.1));

  // First Adam step moves every coordinate by lr * sign(g) (up to eps).
  c.optimizer = OptimizerKind::Adam;
  Optimizer adam(c, 2);
  th = {1.0, 2.0};
  adam.step(th, {0.5, -1e-3}, 0.01);
  CHECK(th[0] == doctest::Approx(0.99).epsilon(1e-6));
  CHECK(th[1] == doctest::Approx(2.01).epsilon(1e-6));
  CHECK(adam.steps() == 1);
}

TEST_CASE("identity-model audit: SGD with lr 1 on CG(n_free) lands on the solution") {
  auto samples = heat_samples(6, 1, 31);
  const SystemOperator& op = *samples[0].op;
  int n_free = 0;
  for (double m : op.mask().mask.data) n_free += m != 0.0;

  NodalFieldModel model(1, 6, 6);
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 1;
  c.optimizer = OptimizerKind::Sgd;
  c.learning_rate = 1.0;
  c.strategy = Strategy{StrategyKind::CG, n_free};
  Trainer t(model, identity_shift(1, 6, 6), c);
  t.train_epoch(samples);
  const NodeField out = model.forward(samples[0].input, op.mask(), t.shift()).output;
  CHECK(relative_l2(out, samples[0].label, op.mask()) < 1e-8);
  CHECK(norm2(op.masked_residual(out)) < 1e-8 * norm2(apply_mask(op.load(), op.mask())));
}

TEST_CASE("SD(1) and CG(1) produce the same parameter update") {
  const auto samples = heat_samples(9, 3, 40);
  ModelConfig mc = tiny_model(9);
  TrainConfig c;
  c.epochs = 1;
  c.batch_size = 3;
  c.learning_rate = 1e-2;
  c.strategy = Strategy{StrategyKind::SD, 1};
  ConvOperatorModel m_sd(mc), m_cg(mc);
  const ShiftStats shift = compute_shift_stats({samples[0].label, samples[1].label, samples[2].label});
  Trainer t_sd(m_sd, shift, c);
  c.strategy = Strategy{StrategyKind::CG, 1};
  Trainer t_cg(m_cg, shift, c);
  const auto g_sd = t_sd.batch_gradient(samples, {0, 1, 2}), g_cg = t_cg.batch_gradient(samples, {0, 1, 2});
  double diff = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < g_sd.size(); ++i) {
    diff = std::max(diff, std::abs(g_sd[i] - g_cg[i]));
    ref = std::max(ref, std::abs(g_sd[i]));
  }
  CHECK(diff <= 1e-12 * ref);
  t_sd.train_epoch(samples);
  t_cg.train_epoch(samples);
  CHECK(m_sd.parameters() == m_cg.parameters());
}

TEST_CASE("supervised gradient is the vjp of the prediction error") {
  const auto samples = heat_samples(9, 2, 50);
  ConvOperatorModel model(tiny_model(9));
  TrainConfig c;
  c.strategy = Strategy{StrategyKind::Supervised, 0};
  const ShiftStats shift = identity_shift(1, 9, 9);
  Trainer t(model, shift, c);
  const auto g = t.batch_gradient(samples, {0, 1});
  std::vector<double> expect(g.size(), 0.0);
  for (int i = 0; i < 2; ++i) {
    const auto fw = model.forward(samples[i].input, samples[i].op->mask(), shift);
    const auto gi = model.vjp(fw.tape, sse_cotangent(samples[i].label, fw.output));
    for (std::size_t k = 0; k < g.size(); ++k) expect[k] += 0.5 * gi[k];
  }
  for (std::size_t k = 0; k < g.size(); k += 7) CHECK(g[k] == doctest::Approx(expect[k]).epsilon(1e-12));

  auto unlabeled = samples;
  unlabeled[0].label = NodeField();
  CHECK_THROWS_AS(t.batch_gradient(unlabeled, {0}), InvalidArgument);
}

TEST_CASE("power-law fit recovers exact exponents") {
  const std::vector<double> x{50, 100, 200, 400};
  std::vector<double> y;
  for (double v : x) y.push_back(3.0 * std::pow(v, -0.5));
  const PowerLaw p = fit_power_law(x, y);
  CHECK(p.a == doctest::Approx(3.0).epsilon(1e-12));
  CHECK(p.b == doctest::Approx(-0.5).epsilon(1e-12));
  CHECK_THROWS_AS(fit_power_law({1.0, 2.0}, {1.0, 0.5}), InvalidArgument);
  CHECK_THROWS_AS(fit_power_law({1.0, 2.0, 3.0}, {1.0, -1.0, 1.0}), InvalidArgument);
}

TEST_CASE("short CG(2) training run cuts the residual tenfold and is reproducible") {
  DatasetSpec spec;
  spec.problem = ProblemKind::Heat;
  spec.resolution = 17;
  spec.n_train = 64;
  spec.n_test = 8;
  spec.seed = 2;
  const Dataset ds = generate_dataset(spec);

  ModelConfig mc;
  mc.hidden_channels = 16;
  mc.n_layers = 3;
  mc.kernel_extent = 1;
  mc.spectral_modes = 4;
  mc.seed = 1;
  TrainConfig tc;
  tc.epochs = 50;
  tc.batch_size = 1;
  tc.learning_rate = 1e-2;
  tc.strategy = Strategy{StrategyKind::CG, 2};
  tc.seed = 1;

  const RunResult a = train_run(ds, mc, tc, RunOptions{});
  MESSAGE("residual " << a.initial_residual << " -> " << a.final_residual << ", test rel L2 "
                      << a.eval.back().mean_rel_l2);
  CHECK(a.final_residual < 0.1 * a.initial_residual);
  CHECK(a.metrics.size() == 50u * 64u);

  tc.epochs = 3;
  const RunResult b1 = train_run(ds, mc, tc, RunOptions{});
  const RunResult b2 = train_run(ds, mc, tc, RunOptions{});
  CHECK(b1.params.values == b2.params.values);
  tc.seed = 2;
  CHECK(train_run(ds, mc, tc, RunOptions{}).params.values != b1.params.values);
}
