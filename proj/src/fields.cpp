#include "vol/fields.hpp"

#include <cmath>
#include <string>

#include "vol/errors.hpp"

namespace vol {

void require_same_shape(const Field3& a, const Field3& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatch(std::string(what) + ": shape (" + std::to_string(a.channels) + "," +
                        std::to_string(a.rows) + "," + std::to_string(a.cols) + ") vs (" +
                        std::to_string(b.channels) + "," + std::to_string(b.rows) + "," +
                        std::to_string(b.cols) + ")");
  }
}

void MaskSpec::validate() const {
  require_same_shape(mask, shift, "mask/shift");
  for (std::size_t i = 0; i < mask.size(); ++i) {
    const double m = mask.data[i];
    if (m != 0.0 && m != 1.0) throw InvalidArgument("mask entries must be 0 or 1");
    if (m == 1.0 && shift.data[i] != 0.0)
      throw InvalidArgument("shift must vanish on free entries");
  }
  for (int c = 0; c < mask.channels; ++c) {
    bool constrained = false;
    for (double m : mask.channel(c)) constrained = constrained || m == 0.0;
    if (!constrained)
      throw InvalidArgument("every channel needs at least one constrained entry");
  }
}

double dot(const Field3& a, const Field3& b) {
  require_same_shape(a, b, "dot");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a.data[i] * b.data[i];
  return s;
}

double norm2(const Field3& a) {
  double s = 0.0;
  for (double v : a.data) s += v * v;
  return std::sqrt(s);
}

void axpy(double alpha, const Field3& x, Field3& y) {
  require_same_shape(x, y, "axpy");
  for (std::size_t i = 0; i < x.size(); ++i) y.data[i] += alpha * x.data[i];
}

void scale(Field3& x, double alpha) {
  for (double& v : x.data) v *= alpha;
}

bool all_finite(const Field3& x) {
  for (double v : x.data)
    if (!std::isfinite(v)) return false;
  return true;
}

void apply_mask_inplace(NodeField& x, const MaskSpec& m) {
  require_same_shape(x, m.mask, "apply_mask");
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] *= m.mask.data[i];
}

NodeField apply_mask(const NodeField& x, const MaskSpec& m) {
  NodeField y = x;
  apply_mask_inplace(y, m);
  return y;
}

NodeField apply_shift_bc(const NodeField& x, const MaskSpec& m) {
  require_same_shape(x, m.mask, "apply_shift_bc");
  NodeField y = x;
  for (std::size_t i = 0; i < y.size(); ++i) y.data[i] = y.data[i] * m.mask.data[i] + m.shift.data[i];
  return y;
}

namespace {

double masked_relative_l2(const NodeField& pred, const NodeField& label, const NodeField* mask) {
  require_same_shape(pred, label, "relative_l2");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (mask && mask->data[i] == 0.0) continue;
    const double d = pred.data[i] - label.data[i];
    num += d * d;
    den += label.data[i] * label.data[i];
  }
  if (den == 0.0) throw InvalidArgument("relative_l2: label has zero norm");
  return std::sqrt(num / den);
}

}  // namespace

double relative_l2(const NodeField& pred, const NodeField& label, const MaskSpec& m) {
  require_same_shape(pred, m.mask, "relative_l2");
  return masked_relative_l2(pred, label, &m.mask);
}

double relative_l2(const NodeField& pred, const NodeField& label) {
  return masked_relative_l2(pred, label, nullptr);
}

}  // namespace vol
