#include "vol/matrix_free.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <string>

#include "vol/errors.hpp"

namespace vol {

GaussField eval_at_gauss(const NodeField& a, const TrialKernel& kernel) {
  if (a.rows != kernel.ny + 1 || a.cols != kernel.nx + 1)
    throw ShapeMismatch("node field (" + std::to_string(a.rows) + "x" + std::to_string(a.cols) +
                        ") does not match trial kernel grid");
  const int ny = kernel.ny, nx = kernel.nx, ns = kernel.n_slots;
  GaussField g(a.channels * kTrialQuantities, ns, ny, nx);
  for (int c = 0; c < a.channels; ++c) {
    const double* src = a.data.data() + c * a.plane();
    for (int q = 0; q < kTrialQuantities; ++q) {
      for (int l = 0; l < ns; ++l) {
        double* dst = g.plane_ptr(c * kTrialQuantities + q, l);
        const double w00 = kernel.entry(l, q, 0, 0), w01 = kernel.entry(l, q, 0, 1);
        const double w10 = kernel.entry(l, q, 1, 0), w11 = kernel.entry(l, q, 1, 1);
        for (int ey = 0; ey < ny; ++ey) {
          const double* r0 = src + std::size_t(ey) * a.cols;
          const double* r1 = r0 + a.cols;
          double* out = dst + std::size_t(ey) * nx;
          for (int ex = 0; ex < nx; ++ex)
            out[ex] = w00 * r0[ex] + w01 * r0[ex + 1] + w10 * r1[ex] + w11 * r1[ex + 1];
        }
      }
    }
  }
  return g;
}

void weight_by_quadrature(GaussField& f, const GaussRule& rule, const JacobianField& jac) {
  if (f.n_slots != rule.size() || f.rows != jac.ny || f.cols != jac.nx)
    throw ShapeMismatch("quadrature weights do not match Gauss field");
  const std::size_t plane = f.plane();
  for (int qn = 0; qn < f.quantities(); ++qn) {
    for (int l = 0; l < f.n_slots; ++l) {
      double* p = f.data.data() + (std::size_t(qn) * f.n_slots + l) * plane;
      const double* det = jac.det.data() + std::size_t(l) * plane;
      const double h = rule.weights[l];
      for (std::size_t i = 0; i < plane; ++i) p[i] *= h * det[i];
    }
  }
}

namespace {

// out(node) += w * in(element) for the element sitting at offset (ey, ex)
// from the node; elements outside the mesh are zero ghosts.
void scatter_plane(const double* in, int ny, int nx, double w, int ey, int ex, double* out) {
  const int cols = nx + 1;
  for (int Ey = 0; Ey < ny; ++Ey) {
    const double* src = in + std::size_t(Ey) * nx;
    double* dst = out + std::size_t(Ey + 1 - ey) * cols + (1 - ex);
    for (int Ex = 0; Ex < nx; ++Ex) dst[Ex] += w * src[Ex];
  }
}

}  // namespace

NodeField test_convolution(const GaussField& f, const TestKernel& kernel) {
  if (f.quantities() != kernel.features || f.n_slots != kernel.n_slots || f.rows != kernel.ny ||
      f.cols != kernel.nx)
    throw ShapeMismatch("feature map does not match test kernel");
  NodeField r(kernel.out_channels, kernel.ny + 1, kernel.nx + 1);
  for (int c = 0; c < kernel.out_channels; ++c) {
    double* out = r.data.data() + c * r.plane();
    for (int ft = 0; ft < kernel.features; ++ft)
      for (int l = 0; l < kernel.n_slots; ++l) {
        const double* in = f.plane_ptr(ft, l);
        for (int ey = 0; ey < 2; ++ey)
          for (int ex = 0; ex < 2; ++ex) {
            const double w = kernel.entry(c, ft, l, ey, ex);
            if (w != 0.0) scatter_plane(in, kernel.ny, kernel.nx, w, ey, ex, out);
          }
      }
  }
  return r;
}

NodeField source_convolution(const GaussField& f, const TestKernel& kernel) {
  if (f.n_slots != kernel.n_slots || f.rows != kernel.ny || f.cols != kernel.nx)
    throw ShapeMismatch("source map does not match test kernel");
  NodeField r(f.quantities(), kernel.ny + 1, kernel.nx + 1);
  for (int c = 0; c < f.quantities(); ++c) {
    double* out = r.data.data() + c * r.plane();
    for (int l = 0; l < kernel.n_slots; ++l)
      for (int ey = 0; ey < 2; ++ey)
        for (int ex = 0; ex < 2; ++ex)
          scatter_plane(f.plane_ptr(c, l), kernel.ny, kernel.nx, kernel.value(l, ey, ex), ey, ex, out);
  }
  return r;
}

GaussField physics_features(const GaussField& at_gauss, const Problem& problem) {
  if (problem.physics() == PhysicsKind::PlaneStress)
    return stress_map(at_gauss, problem.material, problem.thickness);
  return diffusion_flux_map(at_gauss, problem.material);
}

namespace {

// Kinematic quantities paired with the physics features in the energy
// density: grad T for diffusion, engineering strain for plane stress.
GaussField kinematic_features(const GaussField& at_gauss, PhysicsKind physics) {
  if (physics == PhysicsKind::PlaneStress) return strain_map(at_gauss);
  GaussField g(2, at_gauss.n_slots, at_gauss.rows, at_gauss.cols);
  const std::size_t n = std::size_t(at_gauss.n_slots) * at_gauss.plane();
  std::copy_n(at_gauss.data.data() + kDx * n, n, g.data.data());
  std::copy_n(at_gauss.data.data() + kDy * n, n, g.data.data() + n);
  return g;
}

// sum over points of H |J| F.S
double weighted_pairing(const GaussField& f, const GaussField& s, const Discretization& d) {
  const std::size_t plane = f.plane();
  double total = 0.0;
  for (int qn = 0; qn < f.quantities(); ++qn)
    for (int l = 0; l < f.n_slots; ++l) {
      const double* a = f.plane_ptr(qn, l);
      const double* b = s.plane_ptr(qn, l);
      const double* det = d.jac.det.data() + std::size_t(l) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += a[i] * b[i] * det[i];
      total += d.rule.weights[l] * acc;
    }
  return total;
}

void require_problem_shape(const NodeField& a, const Problem& problem, const char* what) {
  if (a.channels != problem.channels() || !a.matches(problem.grid()))
    throw ShapeMismatch(std::string(what) + ": node field does not match problem");
}

void warn_if_constrained(const Problem& problem, const EdgeLoad& load) {
  const auto& g = problem.grid();
  const auto& m = problem.mask.mask;
  for (int c = 0; c < m.channels; ++c) {
    bool all_fixed = true;
    const int n = (load.edge == Edge::Left || load.edge == Edge::Right) ? g.ny + 1 : g.nx + 1;
    for (int k = 0; k < n; ++k) {
      const int j = (load.edge == Edge::Left || load.edge == Edge::Right) ? k : (load.edge == Edge::Top ? g.ny : 0);
      const int i = (load.edge == Edge::Bottom || load.edge == Edge::Top) ? k : (load.edge == Edge::Right ? g.nx : 0);
      all_fixed = all_fixed && m.at(c, j, i) == 0.0;
    }
    if (all_fixed) {
      std::clog << "warning: Neumann load on constrained edge '" << to_string(load.edge) << "' channel "
                << c << " has no effect\n";
    }
  }
}

}  // namespace

NodeField neumann_load(const Problem& problem) {
  const auto& g = problem.grid();
  const int channels = problem.channels();
  NodeField p = NodeField::zeros(g, channels);
  const double xi = 1.0 / std::sqrt(3.0);
  for (const EdgeLoad& load : problem.load.neumann) {
    const bool vertical = load.edge == Edge::Left || load.edge == Edge::Right;
    const int n_nodes = vertical ? g.ny + 1 : g.nx + 1;
    const double h = vertical ? g.hy : g.hx;
    const std::size_t expected = load.per_node ? std::size_t(channels) * n_nodes : std::size_t(channels);
    if (load.values.size() != expected)
      throw ShapeMismatch("edge load on '" + to_string(load.edge) + "' has " +
                          std::to_string(load.values.size()) + " values, expected " +
                          std::to_string(expected));
    warn_if_constrained(problem, load);
    auto node = [&](int k) -> std::pair<int, int> {
      switch (load.edge) {
        case Edge::Left: return {k, 0};
        case Edge::Right: return {k, g.nx};
        case Edge::Bottom: return {0, k};
        case Edge::Top: return {g.ny, k};
      }
      return {0, 0};
    };
    for (int c = 0; c < channels; ++c) {
      auto value = [&](int k) { return load.per_node ? load.values[std::size_t(c) * n_nodes + k] : load.values[c]; };
      for (int k = 0; k + 1 < n_nodes; ++k) {
        const double g0 = value(k), g1 = value(k + 1);
        double f0 = 0.0, f1 = 0.0;
        for (double s : {-xi, xi}) {
          const double n0 = 0.5 * (1.0 - s), n1 = 0.5 * (1.0 + s);
          const double gq = n0 * g0 + n1 * g1;
          f0 += 0.5 * h * gq * n0;
          f1 += 0.5 * h * gq * n1;
        }
        const auto [j0, i0] = node(k);
        const auto [j1, i1] = node(k + 1);
        p.at(c, j0, i0) += f0;
        p.at(c, j1, i1) += f1;
      }
    }
  }
  return p;
}

NodeField load_vector(const Problem& problem) {
  const auto& d = *problem.disc;
  NodeField p = neumann_load(problem);
  const GaussField& src = problem.load.volumetric;
  if (!src.data.empty()) {
    if (src.quantities() != problem.channels()) throw ShapeMismatch("volumetric source channel count");
    GaussField w = src;
    weight_by_quadrature(w, d.rule, d.jac);
    axpy(1.0, source_convolution(w, d.test), p);
  }
  return p;
}

double system_functional(const NodeField& a, const Problem& problem) {
  require_problem_shape(a, problem, "system_functional");
  if (!problem.material.symmetric())
    throw UnsupportedOperation("nonsymmetric material has no minimization form");
  const auto& d = *problem.disc;
  const GaussField at = eval_at_gauss(a, d.trial);
  const GaussField feat = physics_features(at, problem);
  const GaussField kin = kinematic_features(at, problem.physics());
  double pi = 0.5 * weighted_pairing(feat, kin, d);

  const GaussField& src = problem.load.volumetric;
  if (!src.data.empty()) {
    GaussField values(problem.channels(), at.n_slots, at.rows, at.cols);
    for (int c = 0; c < problem.channels(); ++c)
      for (int l = 0; l < at.n_slots; ++l)
        std::copy_n(at.plane_ptr(c * kTrialQuantities + kValue, l), at.plane(), values.plane_ptr(c, l));
    pi -= weighted_pairing(src, values, d);
  }
  if (!problem.load.neumann.empty()) pi -= dot(neumann_load(problem), a);
  return pi;
}

NodeField matvec(const NodeField& p, const Problem& problem) {
  require_problem_shape(p, problem, "matvec");
  const auto& d = *problem.disc;
  GaussField feat = physics_features(eval_at_gauss(p, d.trial), problem);
  weight_by_quadrature(feat, d.rule, d.jac);
  return test_convolution(feat, d.test);
}

NodeField residual_galerkin(const NodeField& a, const Problem& problem) {
  NodeField r = matvec(a, problem);
  axpy(-1.0, load_vector(problem), r);
  return r;
}

double quadratic_form(const NodeField& p, const Problem& problem) {
  require_problem_shape(p, problem, "quadratic_form");
  if (!problem.material.symmetric())
    throw UnsupportedOperation("nonsymmetric material has no energy quadratic form");
  const auto& d = *problem.disc;
  const GaussField at = eval_at_gauss(p, d.trial);
  return weighted_pairing(physics_features(at, problem), kinematic_features(at, problem.physics()), d);
}

SystemOperator::SystemOperator(Problem problem)
    : problem_(std::move(problem)), load_(load_vector(problem_)) {}

NodeField SystemOperator::stiffness_action(const NodeField& a) const { return vol::matvec(a, problem_); }

NodeField SystemOperator::residual(const NodeField& a) const {
  NodeField r = stiffness_action(a);
  axpy(-1.0, load_, r);
  return r;
}

NodeField SystemOperator::masked_residual(const NodeField& a) const {
  NodeField r = residual(a);
  apply_mask_inplace(r, problem_.mask);
  return r;
}

NodeField SystemOperator::matvec(const NodeField& p) const { return stiffness_action(p); }

NodeField SystemOperator::masked_matvec(const NodeField& p) const {
  NodeField r = stiffness_action(p);
  apply_mask_inplace(r, problem_.mask);
  return r;
}

double SystemOperator::quadratic_form(const NodeField& p) const { return vol::quadratic_form(p, problem_); }

double SystemOperator::functional(const NodeField& a) const { return system_functional(a, problem_); }

}  // namespace vol
