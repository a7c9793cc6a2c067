#pragma once

// Structured Q1 quadrilateral meshes, tensor Gauss-Legendre rules and the
// convolution kernels that map nodal fields to Gauss points (trial kernel)
// and Gauss-point feature maps back to nodes (test kernel).
//
// Conventions used throughout the library:
//   * node grid is (ny+1) rows by (nx+1) columns, x varies fastest;
//   * element (ey, ex) owns nodes (ey+dy, ex+dx) for dy, dx in {0, 1};
//     its local node index is j = 2*dy + dx with reference corner
//     (r_j, s_j) = (2*dx-1, 2*dy-1);
//   * Gauss slot l = is*order + ir, i.e. row-major over (s, r).

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

namespace vol {

struct StructuredGrid {
  int nx = 1;
  int ny = 1;
  double hx = 1.0;
  double hy = 1.0;
  double x0 = 0.0;
  double y0 = 0.0;

  // Uniform grid over [x0, x0+width] x [y0, y0+height].
  static StructuredGrid uniform(int nx, int ny, double width, double height, double x0 = 0.0,
                                double y0 = 0.0);

  void validate() const;

  int node_cols() const { return nx + 1; }
  int node_rows() const { return ny + 1; }
  std::size_t node_count() const { return std::size_t(nx + 1) * std::size_t(ny + 1); }
  std::size_t element_count() const { return std::size_t(nx) * std::size_t(ny); }
  double node_x(int i) const { return x0 + hx * i; }
  double node_y(int j) const { return y0 + hy * j; }
  double width() const { return hx * nx; }
  double height() const { return hy * ny; }

  bool operator==(const StructuredGrid&) const = default;
};

struct GaussRule {
  int order = 0;
  std::vector<std::array<double, 2>> points;  // (r, s)
  std::vector<double> weights;
  // 1-D abscissae and weights the tensor rule is built from.
  std::vector<double> abscissae;
  std::vector<double> weights_1d;

  int size() const { return static_cast<int>(weights.size()); }
};

// 1-D Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre_1d(int order, std::vector<double>& x, std::vector<double>& w);

GaussRule gauss_legendre_rule(int order);

constexpr int kQ1Nodes = 4;

struct ShapeTable {
  int n_points = 0;
  // [point][local node]
  std::vector<std::array<double, kQ1Nodes>> values;
  std::vector<std::array<double, kQ1Nodes>> d_dr;
  std::vector<std::array<double, kQ1Nodes>> d_ds;
};

// Reference corner of local node j.
constexpr std::array<double, 2> q1_corner(int j) {
  return {double(2 * (j % 2) - 1), double(2 * (j / 2) - 1)};
}

double q1_value(int j, double r, double s);
std::array<double, 2> q1_gradient(int j, double r, double s);

ShapeTable q1_shape_table(const GaussRule& rule);

// Quantities a trial kernel produces per Gauss point and solution channel.
enum TrialQuantity : int { kValue = 0, kDx = 1, kDy = 2 };
constexpr int kTrialQuantities = 3;

struct TrialKernel {
  int nx = 0, ny = 0;
  int n_slots = 0;
  // [slot][quantity][local node j], j = 2*dy + dx
  std::vector<double> weights;

  double entry(int slot, int quantity, int dy, int dx) const {
    return weights[(std::size_t(slot) * kTrialQuantities + quantity) * kQ1Nodes + 2 * dy + dx];
  }
};

TrialKernel build_trial_kernel(const StructuredGrid& grid, const ShapeTable& table);

enum class PhysicsKind { ScalarDiffusion, PlaneStress };

// Feature channels consumed per Gauss slot: flux (qx, qy) or stress (sxx, syy, sxy).
int feature_channels(PhysicsKind kind);
int solution_channels(PhysicsKind kind);

struct TestKernel {
  PhysicsKind kind = PhysicsKind::ScalarDiffusion;
  int nx = 0, ny = 0;
  int n_slots = 0;
  int out_channels = 0;
  int features = 0;
  // [out channel][feature][slot][ey][ex]; (ey, ex) is the offset of the
  // adjacent element (jy-1+ey, jx-1+ex) relative to node (jy, jx).
  std::vector<double> weights;
  // Test-function values [slot][ey][ex], used for volumetric sources.
  std::vector<double> values;

  double entry(int out, int feature, int slot, int ey, int ex) const {
    return weights[(((std::size_t(out) * features + feature) * n_slots + slot) * 2 + ey) * 2 + ex];
  }
  double value(int slot, int ey, int ex) const {
    return values[(std::size_t(slot) * 2 + ey) * 2 + ex];
  }
};

TestKernel build_test_kernel(const StructuredGrid& grid, const ShapeTable& table,
                             PhysicsKind physics);

struct JacobianField {
  int nx = 0, ny = 0, n_slots = 0;
  std::vector<double> det;  // [slot][ey][ex]

  double at(int slot, int ey, int ex) const {
    return det[(std::size_t(slot) * ny + ey) * nx + ex];
  }
};

JacobianField jacobian_field(const StructuredGrid& grid, const GaussRule& rule);

// Everything derived from (grid, rule, physics) once; shared read-only
// between all samples of a dataset.
struct Discretization {
  StructuredGrid grid;
  PhysicsKind physics = PhysicsKind::ScalarDiffusion;
  GaussRule rule;
  ShapeTable table;
  TrialKernel trial;
  TestKernel test;
  JacobianField jac;

  int n_slots() const { return rule.size(); }
  int channels() const { return solution_channels(physics); }
  // Physical coordinates of Gauss slot l in element (ey, ex).
  std::array<double, 2> gauss_point(int slot, int ey, int ex) const;
};

std::shared_ptr<const Discretization> make_discretization(const StructuredGrid& grid,
                                                          PhysicsKind physics,
                                                          int gauss_order = 2);

}  // namespace vol
