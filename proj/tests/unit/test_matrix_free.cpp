#include <doctest.h>
#include "vol/errors.hpp"

#include <cmath>

#include "helpers.hpp"
#include "vol/harness/diagnostics.hpp"
#include "vol/solvers.hpp"

using namespace vol;

namespace {

// Heat problem on [0,1]^2 with unit conductivity, given source and
// Dirichlet edges.
SystemOperator heat_op(int nodes, double q, std::vector<Edge> edges = {}) {
  ProblemConfig cfg;
  cfg.dirichlet_edges = std::move(edges);
  auto d = test::disc_for(ProblemKind::Heat, nodes, cfg);
  return SystemOperator(problem_factory(ProblemKind::Heat, d, test::const_param(*d, ParameterKind::Source, q), cfg));
}

}  // namespace

TEST_CASE("single-element stiffness of the unit Laplacian") {
  // One element, unit conductivity: K^e columns by unit nodal vectors.
  const SystemOperator op = heat_op(2, 0.0, {Edge::Left});
  for (int j = 0; j < 4; ++j) {
    NodeField e(1, 2, 2);
    e.data[j] = 1.0;
    const NodeField col = op.matvec(e);
    for (int i = 0; i < 4; ++i) {
      const bool same_row = (i / 2) == (j / 2), same_col = (i % 2) == (j % 2);
      const double expect = i == j ? 2.0 / 3.0 : (same_row || same_col) ? -1.0 / 6.0 : -1.0 / 3.0;
      CHECK(col.data[i] == doctest::Approx(expect).epsilon(1e-14));
    }
  }
}

TEST_CASE("global stiffness: zero row sums and symmetry") {
  for (ProblemKind kind : {ProblemKind::Heat, ProblemKind::Darcy, ProblemKind::ElasticityA}) {
    const SystemOperator op(test::random_problem(kind, 7, 11));
    NodeField ones = op.zeros();
    for (auto& v : ones.data) v = 1.0;
    const NodeField k1 = op.matvec(ones);
    CHECK(norm2(k1) < 1e-10 * norm2(op.matvec(test::random_nodes(op.channels(), 7, 7, 5))));
    const NodeField x = test::random_nodes(op.channels(), 7, 7, 1), y = test::random_nodes(op.channels(), 7, 7, 2);
    const double a = dot(op.matvec(x), y), b = dot(x, op.matvec(y));
    CHECK(a == doctest::Approx(b).epsilon(1e-12));
    CHECK(op.quadratic_form(x) == doctest::Approx(dot(x, op.matvec(x))).epsilon(1e-12));
  }
}

TEST_CASE("functional and load closed forms") {
  const SystemOperator free_src = heat_op(9, 0.0);
  NodeField t = free_src.zeros();
  for (int j = 0; j < 9; ++j)
    for (int i = 0; i < 9; ++i) t.at(0, j, i) = free_src.grid().node_x(i);
  CHECK(free_src.functional(t) == doctest::Approx(0.5).epsilon(1e-14));

  const SystemOperator unit_src = heat_op(9, 1.0);
  const double hx = unit_src.grid().hx, hy = unit_src.grid().hy;
  CHECK(unit_src.load().at(0, 4, 4) == doctest::Approx(hx * hy).epsilon(1e-14));
  CHECK(unit_src.load().at(0, 0, 0) == doctest::Approx(hx * hy / 4).epsilon(1e-14));
  CHECK(unit_src.load().at(0, 0, 3) == doctest::Approx(hx * hy / 2).epsilon(1e-14));
  double total = 0.0;
  for (double v : unit_src.load().data) total += v;
  CHECK(total == doctest::Approx(1.0).epsilon(1e-13));
}

TEST_CASE("neumann load integrates the traction") {
  const Problem p = test::random_problem(ProblemKind::ElasticityA, 5, 3);
  const NodeField f = neumann_load(p);
  // 1 N/mm along x on the 100 mm right edge.
  double fx = 0.0, fy = 0.0;
  for (int j = 0; j < 5; ++j) {
    fx += f.at(0, j, 4);
    fy += f.at(1, j, 4);
  }
  CHECK(fx == doctest::Approx(100.0).epsilon(1e-13));
  CHECK(fy == doctest::Approx(0.0).scale(1.0));
  CHECK(f.at(0, 0, 4) == doctest::Approx(12.5).epsilon(1e-13));
  CHECK(f.at(0, 2, 4) == doctest::Approx(25.0).epsilon(1e-13));
  CHECK(f.at(0, 2, 3) == 0.0);
}

TEST_CASE("residual is affine and the Ritz gradient equals the Galerkin residual") {
  for (ProblemKind kind : {ProblemKind::Heat, ProblemKind::Darcy, ProblemKind::ElasticityB}) {
    const SystemOperator op(test::random_problem(kind, 6, 21));
    const int c = op.channels();
    const NodeField a = test::random_nodes(c, 6, 6, 7), b = test::random_nodes(c, 6, 6, 8);
    NodeField lin = a;
    scale(lin, 2.0);
    axpy(-3.0, b, lin);
    // R(2a - 3b) = K(2a - 3b) - P.
    NodeField expect = op.matvec(lin);
    axpy(-1.0, op.load(), expect);
    const NodeField got = op.residual(lin);
    NodeField diff = got;
    axpy(-1.0, expect, diff);
    CHECK(norm2(diff) < 1e-12 * norm2(expect));

    const NodeField r = op.residual(a);
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); i += 3) {
      NodeField ap = a, am = a;
      ap.data[i] += h;
      am.data[i] -= h;
      const double fd = (op.functional(ap) - op.functional(am)) / (2 * h);
      worst = std::max(worst, std::abs(fd - r.data[i]) / std::max(1.0, std::abs(r.data[i])));
    }
    CHECK(worst < 1e-6);
  }
}

TEST_CASE("masked operator is symmetric positive definite on free entries") {
  const SystemOperator op(test::random_problem(ProblemKind::ElasticityA, 6, 4));
  for (std::uint64_t s = 0; s < 5; ++s) {
    NodeField p = test::random_nodes(2, 6, 6, 100 + s);
    for (std::size_t i = 0; i < p.size(); ++i) p.data[i] *= op.mask().mask.data[i];
    CHECK(dot(p, op.masked_matvec(p)) > 0.0);
    const NodeField mp = op.masked_matvec(p);
    for (std::size_t i = 0; i < p.size(); ++i)
      if (op.mask().mask.data[i] == 0.0) CHECK(mp.data[i] == 0.0);
  }
}

TEST_CASE("matrix-free path agrees with dense assembly on every benchmark") {
  for (ProblemKind kind : {ProblemKind::Heat, ProblemKind::Darcy, ProblemKind::ElasticityA, ProblemKind::ElasticityB}) {
    const OracleDiscrepancy d = oracle_check(kind, 6, 3, 99);
    CHECK(d.max() < 1e-12);
  }
}

TEST_CASE("nonsymmetric conductivity has a weak form but no functional") {
  auto d = test::disc_for(ProblemKind::Heat, 5);
  Problem p = problem_factory(ProblemKind::Heat, d, test::const_param(*d, ParameterKind::Source, 1.0));
  p.material = uniform_material(MaterialKind::General2x2, {1.0, 0.4, -0.2, 2.0}, 4, 4, 4);
  const SystemOperator op(p);
  const NodeField x = test::random_nodes(1, 5, 5, 1), y = test::random_nodes(1, 5, 5, 2);
  CHECK(std::abs(dot(op.matvec(x), y) - dot(x, op.matvec(y))) > 1e-6);
  CHECK_THROWS_AS(op.functional(x), UnsupportedOperation);
  const DenseSystem sys = assemble_dense(p);
  const Eigen::VectorXd kx = sys.K * flatten(x);
  CHECK((kx - flatten(op.matvec(x))).norm() < 1e-12 * kx.norm());
}
