#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vol/mesh.hpp"

namespace vol {

// Dense channels x rows x cols array of doubles; x (cols) varies fastest.
struct Field3 {
  int channels = 0;
  int rows = 0;
  int cols = 0;
  std::vector<double> data;

  Field3() = default;
  Field3(int c, int r, int w, double fill = 0.0)
      : channels(c), rows(r), cols(w), data(std::size_t(c) * r * w, fill) {}

  std::size_t size() const { return data.size(); }
  std::size_t plane() const { return std::size_t(rows) * cols; }
  double& at(int c, int r, int w) { return data[(std::size_t(c) * rows + r) * cols + w]; }
  double at(int c, int r, int w) const { return data[(std::size_t(c) * rows + r) * cols + w]; }
  double* ptr(int c, int r, int w) { return data.data() + (std::size_t(c) * rows + r) * cols + w; }
  const double* ptr(int c, int r, int w) const { return data.data() + (std::size_t(c) * rows + r) * cols + w; }
  std::span<double> channel(int c) { return {data.data() + c * plane(), plane()}; }
  std::span<const double> channel(int c) const { return {data.data() + c * plane(), plane()}; }

  bool same_shape(const Field3& o) const {
    return channels == o.channels && rows == o.rows && cols == o.cols;
  }
};

// Nodal values: a, R, p, delta-a, mask, shift.
struct NodeField : Field3 {
  using Field3::Field3;
  static NodeField zeros(const StructuredGrid& g, int channels) {
    return NodeField(channels, g.node_rows(), g.node_cols());
  }
  bool matches(const StructuredGrid& g) const { return rows == g.node_rows() && cols == g.node_cols(); }
};

// Per-element Gauss-point channels; channel index = quantity * n_slots + slot.
struct GaussField : Field3 {
  int n_slots = 0;
  GaussField() = default;
  GaussField(int quantities, int slots, int ny, int nx)
      : Field3(quantities * slots, ny, nx), n_slots(slots) {}
  int quantities() const { return n_slots ? channels / n_slots : 0; }
  double& q(int quantity, int slot, int ey, int ex) { return at(quantity * n_slots + slot, ey, ex); }
  double q(int quantity, int slot, int ey, int ex) const {
    return at(quantity * n_slots + slot, ey, ex);
  }
  double* plane_ptr(int quantity, int slot) { return data.data() + (std::size_t(quantity) * n_slots + slot) * plane(); }
  const double* plane_ptr(int quantity, int slot) const {
    return data.data() + (std::size_t(quantity) * n_slots + slot) * plane();
  }
};

struct MaskSpec {
  NodeField mask;   // 1 = free, 0 = constrained
  NodeField shift;  // prescribed values on constrained entries, zero elsewhere

  void validate() const;
};

void require_same_shape(const Field3& a, const Field3& b, const char* what);

double dot(const Field3& a, const Field3& b);
double norm2(const Field3& a);
// y += alpha * x
void axpy(double alpha, const Field3& x, Field3& y);
void scale(Field3& x, double alpha);
bool all_finite(const Field3& x);

NodeField apply_mask(const NodeField& x, const MaskSpec& m);
void apply_mask_inplace(NodeField& x, const MaskSpec& m);
NodeField apply_shift_bc(const NodeField& x, const MaskSpec& m);

// ||pred - label|| / ||label|| over the free entries of the mask.
double relative_l2(const NodeField& pred, const NodeField& label, const MaskSpec& m);
double relative_l2(const NodeField& pred, const NodeField& label);

}  // namespace vol
