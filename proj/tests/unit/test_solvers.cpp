#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "vol/errors.hpp"
#include "vol/solvers.hpp"

using namespace vol;

namespace {

struct Dense {
  Eigen::MatrixXd K;  // free block
  Eigen::VectorXd b;  // free right-hand side with the shift moved over
  std::vector<int> free;
};

Dense dense_free(const SystemOperator& op) {
  const DenseSystem sys = assemble_dense(op.problem());
  Dense d;
  for (std::size_t i = 0; i < sys.dofs(); ++i)
    if (op.mask().mask.data[i] != 0.0) d.free.push_back(int(i));
  const int n = int(d.free.size());
  d.K.resize(n, n);
  d.b.resize(n);
  const Eigen::VectorXd full_rhs = sys.P - sys.K * flatten(op.mask().shift);
  for (int i = 0; i < n; ++i) {
    d.b[i] = full_rhs[d.free[i]];
    for (int j = 0; j < n; ++j) d.K(i, j) = sys.K(d.free[i], d.free[j]);
  }
  return d;
}

Eigen::VectorXd gather(const NodeField& f, const std::vector<int>& idx) {
  Eigen::VectorXd v(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) v[Eigen::Index(i)] = f.data[idx[i]];
  return v;
}

double energy_error(const Dense& d, const Eigen::VectorXd& x, const Eigen::VectorXd& xs) {
  const Eigen::VectorXd e = x - xs;
  return std::sqrt(e.dot(d.K * e));
}

}  // namespace

TEST_CASE("one steepest-descent step matches the closed form") {
  for (ProblemKind kind : {ProblemKind::Heat, ProblemKind::ElasticityA}) {
    const SystemOperator op(test::random_problem(kind, 6, 5));
    const Dense d = dense_free(op);
    const NodeField a = apply_shift_bc(test::random_nodes(op.channels(), 6, 6, 9), op.mask());
    const NodeField R = op.masked_residual(a);
    const Eigen::VectorXd r = d.b - d.K * gather(a, d.free);  // -R on the free block
    const double alpha = r.dot(r) / r.dot(d.K * r);
    const Eigen::VectorXd expect = alpha * r;
    const UpdateResult sd = sd_steps(R, a, op, 1);
    const Eigen::VectorXd got = gather(sd.delta, d.free);
    CHECK((got - expect).norm() <= 1e-13 * expect.norm());
    CHECK(sd.report.steps[0].alpha == doctest::Approx(alpha).epsilon(1e-13));
    // Constrained entries are never touched.
    for (std::size_t i = 0; i < a.size(); ++i)
      if (op.mask().mask.data[i] == 0.0) CHECK(sd.delta.data[i] == 0.0);
  }
}

TEST_CASE("CG(1) and SD(1) coincide") {
  const SystemOperator op(test::random_problem(ProblemKind::Darcy, 9, 3));
  const NodeField a = apply_shift_bc(test::random_nodes(1, 9, 9, 4), op.mask());
  const NodeField R = op.masked_residual(a);
  const NodeField s = sd_steps(R, a, op, 1).delta, c = cg_steps(R, a, op, 1).delta;
  NodeField diff = s;
  axpy(-1.0, c, diff);
  CHECK(norm2(diff) <= 1e-14 * norm2(s));
}

TEST_CASE("CG updates: Krylov span, monotone energy error, finite termination") {
  const SystemOperator op(test::random_problem(ProblemKind::Heat, 6, 8));
  const Dense d = dense_free(op);
  const Eigen::VectorXd xs = d.K.ldlt().solve(d.b);
  const NodeField a = apply_shift_bc(test::random_nodes(1, 6, 6, 2), op.mask());
  const NodeField R = op.masked_residual(a);
  const Eigen::VectorXd x0 = gather(a, d.free);
  const Eigen::VectorXd r0 = d.b - d.K * x0;
  const int n = int(d.free.size());

  double prev = energy_error(d, x0, xs);
  for (int k = 1; k <= 5; ++k) {
    const Eigen::VectorXd dx = gather(cg_steps(R, a, op, k).delta, d.free);
    const double e = energy_error(d, x0 + dx, xs);
    CHECK(e < prev);
    prev = e;
    // dx lies in span{r0, K r0, ..., K^(k-1) r0}.
    Eigen::MatrixXd basis(n, k);
    basis.col(0) = r0 / r0.norm();
    for (int j = 1; j < k; ++j) {
      basis.col(j) = d.K * basis.col(j - 1);
      basis.col(j) /= basis.col(j).norm();
    }
    const Eigen::VectorXd coeff = basis.colPivHouseholderQr().solve(dx);
    CHECK((basis * coeff - dx).norm() <= 1e-9 * dx.norm());
  }

  // n free unknowns: CG reaches the solution in at most n steps.
  const Eigen::VectorXd dx = gather(cg_steps(R, a, op, n).delta, d.free);
  CHECK((x0 + dx - xs).norm() <= 1e-8 * xs.norm());

  CHECK_THROWS_AS(cg_steps(R, a, op, 0), InvalidArgument);
  CHECK_THROWS_AS(sd_steps(R, a, op, 0), InvalidArgument);
}

TEST_CASE("SD(n) keeps decreasing the energy error") {
  const SystemOperator op(test::random_problem(ProblemKind::ElasticityB, 5, 6));
  const Dense d = dense_free(op);
  const Eigen::VectorXd xs = d.K.ldlt().solve(d.b);
  const NodeField a = apply_shift_bc(test::random_nodes(2, 5, 5, 3), op.mask());
  const NodeField R = op.masked_residual(a);
  const Eigen::VectorXd x0 = gather(a, d.free);
  double prev = energy_error(d, x0, xs);
  for (int k = 1; k <= 6; ++k) {
    const double e = energy_error(d, x0 + gather(sd_steps(R, a, op, k).delta, d.free), xs);
    CHECK(e < prev);
    prev = e;
  }
}

TEST_CASE("cg_solve matches the dense solution") {
  for (ProblemKind kind : {ProblemKind::Heat, ProblemKind::Darcy, ProblemKind::ElasticityA, ProblemKind::ElasticityB}) {
    const SystemOperator op(test::random_problem(kind, 9, 17));
    const NodeField ref = dense_solve(assemble_dense(op.problem()));
    const SolveResult s = cg_solve(op, op.zeros(), 1e-12);
    CHECK(s.report.converged);
    NodeField diff = s.solution;
    axpy(-1.0, ref, diff);
    CHECK(norm2(diff) <= 1e-8 * norm2(ref));
    for (std::size_t i = 0; i < ref.size(); ++i)
      if (op.mask().mask.data[i] == 0.0) CHECK(s.solution.data[i] == op.mask().shift.data[i]);
    const auto& steps = s.report.steps;
    REQUIRE(steps.size() >= 2);
    CHECK(steps.back().residual_norm < steps.front().residual_norm);
  }
}

TEST_CASE("cg_solve reports non-convergence instead of throwing") {
  const SystemOperator op(test::random_problem(ProblemKind::Heat, 17, 1));
  const SolveResult s = cg_solve(op, op.zeros(), 1e-14, 3);
  CHECK_FALSE(s.report.converged);
  CHECK(s.report.iterations() == 3);
}

TEST_CASE("breakdown on non-positive curvature") {
  // Material validation runs in the factory; negating the conductivity
  // afterwards makes every curvature negative.
  auto d = test::disc_for(ProblemKind::Heat, 5);
  Problem p = problem_factory(ProblemKind::Heat, d, test::const_param(*d, ParameterKind::Source, 1.0));
  for (auto& k : p.material.data) k = -1.0;
  const SystemOperator op(p);
  const NodeField r = op.masked_residual(op.zeros());
  CHECK_THROWS_AS(sd_steps(r, op.zeros(), op, 1), SolverBreakdown);
  CHECK_THROWS_AS(cg_steps(r, op.zeros(), op, 1), SolverBreakdown);
}

TEST_CASE("restarted CG baseline") {
  std::vector<SystemOperator> ops;
  std::vector<NodeField> refs;
  for (std::uint64_t s = 0; s < 3; ++s) {
    ops.emplace_back(test::random_problem(ProblemKind::Heat, 9, 40 + s));
    refs.push_back(cg_solve(ops.back(), ops.back().zeros(), 1e-12).solution);
  }
  std::vector<const SystemOperator*> ptrs;
  for (auto& o : ops) ptrs.push_back(&o);
  NodeField mean = ops[0].zeros();
  const BaselineResult b = restarted_cg_baseline(ptrs, refs, 2, 6, BaselineInit::ShiftMean, &mean, 0);
  CHECK(b.mean_rel_l2.size() == 7);
  CHECK(b.mean_rel_l2.front() == doctest::Approx(1.0));
  for (std::size_t e = 1; e < b.energy_error.size(); ++e)
    for (std::size_t s = 0; s < 3; ++s) CHECK(b.energy_error[e][s] < b.energy_error[e - 1][s]);

  const BaselineResult r1 = restarted_cg_baseline(ptrs, refs, 2, 2, BaselineInit::RandomNormal, nullptr, 5);
  const BaselineResult r2 = restarted_cg_baseline(ptrs, refs, 2, 2, BaselineInit::RandomNormal, nullptr, 5);
  CHECK(r1.mean_rel_l2 == r2.mean_rel_l2);
  CHECK(r1.mean_rel_l2.front() > 1.0);
  CHECK_THROWS_AS(restarted_cg_baseline(ptrs, refs, 2, 2, BaselineInit::ShiftMean, nullptr, 0), InvalidArgument);
}
