#include "vol/mesh.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "vol/errors.hpp"

namespace vol {

StructuredGrid StructuredGrid::uniform(int nx, int ny, double width, double height, double x0,
                                       double y0) {
  if (nx < 1 || ny < 1) throw InvalidArgument("grid needs at least one element per axis");
  StructuredGrid g{nx, ny, width / nx, height / ny, x0, y0};
  g.validate();
  return g;
}

void StructuredGrid::validate() const {
  if (nx < 1 || ny < 1) throw InvalidArgument("grid needs at least one element per axis");
  if (!(hx > 0.0) || !(hy > 0.0)) throw InvalidArgument("element sizes must be positive");
}

void gauss_legendre_1d(int order, std::vector<double>& x, std::vector<double>& w) {
  x.assign(order, 0.0);
  w.assign(order, 0.0);
  // Newton on P_n starting from the Chebyshev-like guess; nodes are symmetric.
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= order; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = order * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    // Recompute derivative at converged z for the weight.
    double p0 = 1.0, p1 = 0.0;
    for (int k = 1; k <= order; ++k) {
      const double p2 = p1;
      p1 = p0;
      p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
    }
    dp = order * (z * p0 - p1) / (z * z - 1.0);
    const double wi = 2.0 / ((1.0 - z * z) * dp * dp);
    x[i] = -z;
    x[order - 1 - i] = z;
    w[i] = wi;
    w[order - 1 - i] = wi;
  }
  if (order % 2 == 1) x[order / 2] = 0.0;
}

GaussRule gauss_legendre_rule(int order) {
  if (order < 1 || order > 10)
    throw InvalidArgument("Gauss order must lie in [1, 10], got " + std::to_string(order));
  GaussRule rule;
  rule.order = order;
  gauss_legendre_1d(order, rule.abscissae, rule.weights_1d);
  for (int is = 0; is < order; ++is) {
    for (int ir = 0; ir < order; ++ir) {
      rule.points.push_back({rule.abscissae[ir], rule.abscissae[is]});
      rule.weights.push_back(rule.weights_1d[ir] * rule.weights_1d[is]);
    }
  }
  return rule;
}

double q1_value(int j, double r, double s) {
  const auto c = q1_corner(j);
  return 0.25 * (1.0 + c[0] * r) * (1.0 + c[1] * s);
}

std::array<double, 2> q1_gradient(int j, double r, double s) {
  const auto c = q1_corner(j);
  return {0.25 * c[0] * (1.0 + c[1] * s), 0.25 * c[1] * (1.0 + c[0] * r)};
}

ShapeTable q1_shape_table(const GaussRule& rule) {
  ShapeTable t;
  t.n_points = rule.size();
  t.values.resize(t.n_points);
  t.d_dr.resize(t.n_points);
  t.d_ds.resize(t.n_points);
  for (int l = 0; l < t.n_points; ++l) {
    const auto [r, s] = rule.points[l];
    for (int j = 0; j < kQ1Nodes; ++j) {
      t.values[l][j] = q1_value(j, r, s);
      const auto g = q1_gradient(j, r, s);
      t.d_dr[l][j] = g[0];
      t.d_ds[l][j] = g[1];
    }
  }
  return t;
}

TrialKernel build_trial_kernel(const StructuredGrid& grid, const ShapeTable& table) {
  grid.validate();
  TrialKernel k;
  k.nx = grid.nx;
  k.ny = grid.ny;
  k.n_slots = table.n_points;
  k.weights.resize(std::size_t(k.n_slots) * kTrialQuantities * kQ1Nodes);
  // Affine map x = x_c + (hx/2) r, so d/dx = (2/hx) d/dr.
  const double sx = 2.0 / grid.hx, sy = 2.0 / grid.hy;
  for (int l = 0; l < k.n_slots; ++l) {
    for (int j = 0; j < kQ1Nodes; ++j) {
      const std::size_t base = std::size_t(l) * kTrialQuantities * kQ1Nodes;
      k.weights[base + kValue * kQ1Nodes + j] = table.values[l][j];
      k.weights[base + kDx * kQ1Nodes + j] = sx * table.d_dr[l][j];
      k.weights[base + kDy * kQ1Nodes + j] = sy * table.d_ds[l][j];
    }
  }
  return k;
}

int feature_channels(PhysicsKind kind) { return kind == PhysicsKind::PlaneStress ? 3 : 2; }
int solution_channels(PhysicsKind kind) { return kind == PhysicsKind::PlaneStress ? 2 : 1; }

TestKernel build_test_kernel(const StructuredGrid& grid, const ShapeTable& table,
                             PhysicsKind physics) {
  if (physics != PhysicsKind::ScalarDiffusion && physics != PhysicsKind::PlaneStress)
    throw UnsupportedOperation("unsupported physics kind for test kernel");
  const TrialKernel trial = build_trial_kernel(grid, table);
  TestKernel k;
  k.kind = physics;
  k.nx = grid.nx;
  k.ny = grid.ny;
  k.n_slots = trial.n_slots;
  k.out_channels = solution_channels(physics);
  k.features = feature_channels(physics);
  k.weights.assign(std::size_t(k.out_channels) * k.features * k.n_slots * 4, 0.0);
  k.values.assign(std::size_t(k.n_slots) * 4, 0.0);

  auto w = [&](int out, int f, int l, int ey, int ex) -> double& {
    return k.weights[(((std::size_t(out) * k.features + f) * k.n_slots + l) * 2 + ey) * 2 + ex];
  };
  for (int l = 0; l < k.n_slots; ++l) {
    for (int ey = 0; ey < 2; ++ey) {
      for (int ex = 0; ex < 2; ++ex) {
        // The node sits at local position (1-ey, 1-ex) of the adjacent element.
        const int dy = 1 - ey, dx = 1 - ex;
        const double v = trial.entry(l, kValue, dy, dx);
        const double vx = trial.entry(l, kDx, dy, dx);
        const double vy = trial.entry(l, kDy, dy, dx);
        k.values[(std::size_t(l) * 2 + ey) * 2 + ex] = v;
        if (physics == PhysicsKind::ScalarDiffusion) {
          w(0, 0, l, ey, ex) = vx;
          w(0, 1, l, ey, ex) = vy;
        } else {
          // Virtual strain of a unit nodal displacement along x, then along y.
          w(0, 0, l, ey, ex) = vx;
          w(0, 2, l, ey, ex) = vy;
          w(1, 1, l, ey, ex) = vy;
          w(1, 2, l, ey, ex) = vx;
        }
      }
    }
  }
  return k;
}

JacobianField jacobian_field(const StructuredGrid& grid, const GaussRule& rule) {
  grid.validate();
  JacobianField j;
  j.nx = grid.nx;
  j.ny = grid.ny;
  j.n_slots = rule.size();
  j.det.assign(std::size_t(j.n_slots) * grid.nx * grid.ny, 0.25 * grid.hx * grid.hy);
  return j;
}

std::array<double, 2> Discretization::gauss_point(int slot, int ey, int ex) const {
  const auto [r, s] = rule.points[slot];
  return {grid.x0 + grid.hx * (ex + 0.5 * (1.0 + r)), grid.y0 + grid.hy * (ey + 0.5 * (1.0 + s))};
}

std::shared_ptr<const Discretization> make_discretization(const StructuredGrid& grid,
                                                          PhysicsKind physics, int gauss_order) {
  grid.validate();
  auto d = std::make_shared<Discretization>();
  d->grid = grid;
  d->physics = physics;
  d->rule = gauss_legendre_rule(gauss_order);
  d->table = q1_shape_table(d->rule);
  d->trial = build_trial_kernel(grid, d->table);
  d->test = build_test_kernel(grid, d->table, physics);
  d->jac = jacobian_field(grid, d->rule);
  return d;
}

}  // namespace vol
