#pragma once

// Random and structured input fields for the benchmarks. Every sampler can
// produce the Gauss-point layout (problem parameters, model input) and the
// node layout; both come from the same realization.

#include <cstdint>
#include <vector>

#include "vol/mesh.hpp"
#include "vol/physics.hpp"

namespace vol {

// Tensor-product sample coordinates of a layout: Gauss points ordered
// element-major then abscissa, or node coordinates.
struct TensorCoords {
  std::vector<double> xs, ys;
};

TensorCoords sample_coords(const StructuredGrid& grid, Sampling sampling, int gauss_order = 2);

// Scatters a (ys.size() x xs.size()) row-major tensor of values into the
// ParameterField layout.
ParameterField tensor_to_parameter(const std::vector<double>& tensor, const StructuredGrid& grid, Sampling sampling,
                                   ParameterKind kind, int gauss_order = 2);

struct GrfConfig {
  double length_scale = 0.2;  // correlation length as a fraction of the domain width
  double variance = 1.0;
  double mean = 0.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Stationary Gaussian field with squared-exponential covariance
//   C(r) = variance * exp(-|r|^2 / (2 l^2)),
// synthesized as a random Fourier series on a periodic box twice the domain
// size and restricted to the domain. Mode weights follow the SE spectral
// density and sum to the variance.
class GaussianRandomField {
 public:
  GaussianRandomField(const StructuredGrid& grid, const GrfConfig& cfg);

  // Values on the tensor grid ys x xs (row-major, x fastest).
  std::vector<double> evaluate(const std::vector<double>& xs, const std::vector<double>& ys) const;
  double value(double x, double y) const;
  std::size_t n_modes() const { return kx_.size(); }

 private:
  double mean_;
  double wx_, wy_;  // fundamental angular frequencies of the periodic box
  std::vector<int> kx_, ky_;
  std::vector<double> a_, b_;  // sqrt(weight) * N(0,1) coefficients
};

ParameterField sample_grf(const StructuredGrid& grid, const GrfConfig& cfg, Sampling sampling = Sampling::GaussPoints,
                          ParameterKind kind = ParameterKind::Source, int gauss_order = 2);

struct DarcyConfig {
  GrfConfig grf{0.15, 1.0, 0.0, 0};
  double high = 12.0;
  double low = 3.0;

  void validate() const;
};

// Two-phase conductivity: high where the GRF is >= 0, low elsewhere.
ParameterField sample_darcy_conductivity(const StructuredGrid& grid, const DarcyConfig& cfg,
                                         Sampling sampling = Sampling::GaussPoints, int gauss_order = 2);

// theta(x, y) = t0 + (t1 - t0) |x - xc| / (W / 2), xc the plate centre and
// W the plate width. Angles in radians within [-pi/2, pi/2].
ParameterField sample_fiber_linear(double t0, double t1, const StructuredGrid& grid,
                                   Sampling sampling = Sampling::GaussPoints, int gauss_order = 2);

// Clamped uniform cubic B-spline basis on [0, 1] with n control points;
// returns the n basis values at u.
std::vector<double> bspline_basis(int n, double u);

// Surface sum_ij c[j*n + i] B_i(u(x)) B_j(v(y)) with c row-major over (y, x).
ParameterField sample_fiber_bspline(const std::vector<double>& control, int n, const StructuredGrid& grid,
                                    Sampling sampling = Sampling::GaussPoints, int gauss_order = 2);

}  // namespace vol
