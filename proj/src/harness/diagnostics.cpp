#include "vol/harness/diagnostics.hpp"

#include <algorithm>
#include <cmath>

#include "vol/harness/dataset.hpp"
#include "vol/harness/random.hpp"
#include "vol/matrix_free.hpp"
#include "vol/model.hpp"
#include "vol/solvers.hpp"
#include "vol/training.hpp"

namespace vol {

namespace {

double rel_inf(const Eigen::VectorXd& got, const Eigen::VectorXd& ref) {
  const double scale = std::max(ref.lpNorm<Eigen::Infinity>(), 1e-300);
  return (got - ref).lpNorm<Eigen::Infinity>() / scale;
}

// Relative error with a floor so near-zero pairs do not dominate.
double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }

}  // namespace

double OracleDiscrepancy::max() const { return std::max({residual, matvec, load, functional}); }

OracleDiscrepancy oracle_check(ProblemKind kind, int nodes_per_side, int n_inputs, std::uint64_t seed) {
  DatasetSpec spec;
  spec.problem = kind;
  spec.resolution = nodes_per_side;
  const auto disc = make_discretization(default_grid(kind, nodes_per_side, spec.problem_cfg), physics_of(kind));
  OracleDiscrepancy worst;
  for (int s = 0; s < n_inputs; ++s) {
    const auto param = sample_input(spec, disc->grid, derive_seed(seed, std::uint64_t(s)), Sampling::GaussPoints);
    const Problem prob = problem_factory(kind, disc, param, spec.problem_cfg);
    const DenseSystem dense = assemble_dense(prob);
    CounterRng rng(derive_seed(seed ^ 0x5eed, std::uint64_t(s)));
    NodeField a = NodeField::zeros(disc->grid, prob.channels());
    for (double& v : a.data) v = rng.normal();
    const Eigen::VectorXd av = flatten(a);
    const Eigen::VectorXd ka = dense.K * av;
    worst.residual = std::max(worst.residual, rel_inf(flatten(residual_galerkin(a, prob)), ka - dense.P));
    worst.matvec = std::max(worst.matvec, rel_inf(flatten(matvec(a, prob)), ka));
    worst.load = std::max(worst.load, rel_inf(flatten(load_vector(prob)), dense.P));
    const double pi_dense = 0.5 * av.dot(ka) - av.dot(dense.P);
    worst.functional = std::max(worst.functional, rel_err(system_functional(a, prob), pi_dense));
  }
  return worst;
}

GradCheckResult gradient_check(std::uint64_t seed, double h) {
  GradCheckResult out;
  // Small model on a 5x5-node grid (4x4 elements of Gauss input).
  ModelConfig mc;
  mc.in_channels = 2;
  mc.hidden_channels = 4;
  mc.n_layers = 1;
  mc.kernel_extent = 3;
  mc.spectral_modes = 2;
  mc.seed = seed;
  ModelParams p = model_init(mc);
  CounterRng rng(derive_seed(seed, 1));
  for (double& v : p.values) v += 0.1 * rng.normal();
  Field3 input(2, 4, 4);
  for (double& v : input.data) v = rng.normal();
  MaskSpec mask{NodeField(1, 5, 5, 1.0), NodeField(1, 5, 5, 0.0)};
  for (int i = 0; i < 5; ++i) {
    mask.mask.at(0, 0, i) = 0.0;
    mask.shift.at(0, 0, i) = 0.25;
  }
  ShiftStats shift{NodeField(1, 5, 5, 0.1), NodeField(1, 5, 5, 1.3)};
  NodeField cot(1, 5, 5);
  for (double& v : cot.data) v = rng.normal();
  const auto fw = model_forward(p, input, mask, shift);
  const auto g = model_vjp(p, fw.tape, cot);
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    ModelParams q = p;
    q.values[i] = p.values[i] + h;
    const double fp = dot(model_forward(q, input, mask, shift).output, cot);
    q.values[i] = p.values[i] - h;
    const double fm = dot(model_forward(q, input, mask, shift).output, cot);
    const double fd = (fp - fm) / (2.0 * h);
    out.model_max_rel = std::max(out.model_max_rel, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
  }

  // d||Mask(K a - P)|| / da on a small Darcy problem.
  DatasetSpec spec;
  spec.problem = ProblemKind::Darcy;
  const auto disc = make_discretization(default_grid(spec.problem, 6, spec.problem_cfg), PhysicsKind::ScalarDiffusion);
  const auto param = sample_input(spec, disc->grid, derive_seed(seed, 2), Sampling::GaussPoints);
  const SystemOperator op(problem_factory(spec.problem, disc, param, spec.problem_cfg));
  NodeField a = op.zeros();
  for (double& v : a.data) v = rng.normal();
  const NodeField grad = dm_loss_gradient(op.masked_residual(a), op);
  for (std::size_t i = 0; i < a.size(); ++i) {
    NodeField ap = a, am = a;
    ap.data[i] += h;
    am.data[i] -= h;
    const double fd = (dm_loss(op.masked_residual(ap)) - dm_loss(op.masked_residual(am))) / (2.0 * h);
    out.dm_max_rel =
        std::max(out.dm_max_rel, std::abs(fd - grad.data[i]) / std::max({std::abs(fd), std::abs(grad.data[i]), 1e-6}));
  }
  return out;
}

}  // namespace vol
