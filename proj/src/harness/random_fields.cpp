#include "vol/harness/random_fields.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "vol/errors.hpp"
#include "vol/harness/random.hpp"

namespace vol {

namespace {

constexpr double kPi = std::numbers::pi;

void check_angle(double t) {
  if (!(t >= -kPi / 2 - 1e-15 && t <= kPi / 2 + 1e-15))
    throw InvalidArgument("fiber angle " + std::to_string(t) + " outside [-pi/2, pi/2]");
}

}  // namespace

TensorCoords sample_coords(const StructuredGrid& grid, Sampling sampling, int order) {
  grid.validate();
  TensorCoords c;
  if (sampling == Sampling::Nodes) {
    for (int i = 0; i < grid.node_cols(); ++i) c.xs.push_back(grid.node_x(i));
    for (int j = 0; j < grid.node_rows(); ++j) c.ys.push_back(grid.node_y(j));
    return c;
  }
  const GaussRule rule = gauss_legendre_rule(order);
  for (int ex = 0; ex < grid.nx; ++ex)
    for (int ir = 0; ir < order; ++ir) c.xs.push_back(grid.x0 + grid.hx * (ex + 0.5 * (1.0 + rule.abscissae[ir])));
  for (int ey = 0; ey < grid.ny; ++ey)
    for (int is = 0; is < order; ++is) c.ys.push_back(grid.y0 + grid.hy * (ey + 0.5 * (1.0 + rule.abscissae[is])));
  return c;
}

ParameterField tensor_to_parameter(const std::vector<double>& t, const StructuredGrid& grid, Sampling sampling,
                                   ParameterKind kind, int order) {
  ParameterField p;
  p.kind = kind;
  p.sampling = sampling;
  if (sampling == Sampling::Nodes) {
    const int rows = grid.node_rows(), cols = grid.node_cols();
    if (t.size() != std::size_t(rows) * cols) throw ShapeMismatch("tensor does not match node layout");
    p.values = Field3(1, rows, cols);
    p.values.data = t;
    return p;
  }
  const std::size_t nxt = std::size_t(grid.nx) * order;
  if (t.size() != nxt * grid.ny * order) throw ShapeMismatch("tensor does not match Gauss layout");
  p.values = Field3(order * order, grid.ny, grid.nx);
  for (int is = 0; is < order; ++is)
    for (int ir = 0; ir < order; ++ir)
      for (int ey = 0; ey < grid.ny; ++ey)
        for (int ex = 0; ex < grid.nx; ++ex)
          p.values.at(is * order + ir, ey, ex) = t[(std::size_t(ey) * order + is) * nxt + std::size_t(ex) * order + ir];
  return p;
}

void GrfConfig::validate() const {
  if (!(length_scale > 0.0 && length_scale <= 1.0)) throw InvalidArgument("GRF length scale must be in (0, 1]");
  if (!(variance >= 0.0) || !std::isfinite(variance)) throw InvalidArgument("GRF variance must be >= 0");
  if (!std::isfinite(mean)) throw InvalidArgument("GRF mean must be finite");
}

GaussianRandomField::GaussianRandomField(const StructuredGrid& grid, const GrfConfig& cfg) : mean_(cfg.mean) {
  cfg.validate();
  grid.validate();
  const double lx = grid.nx * grid.hx, ly = grid.ny * grid.hy;
  const double ell = cfg.length_scale * lx;
  wx_ = 2.0 * kPi / (2.0 * lx);
  wy_ = 2.0 * kPi / (2.0 * ly);
  if (cfg.variance == 0.0) return;
  // Spectral density exp(-l^2 |w|^2 / 2) is below e^-18 beyond |w| l = 6.
  const int kmx = int(std::ceil(6.0 / (ell * wx_))), kmy = int(std::ceil(6.0 / (ell * wy_)));
  std::vector<double> w;
  for (int ky = 0; ky <= kmy; ++ky)
    for (int kx = -kmx; kx <= kmx; ++kx) {
      if (ky == 0 && kx < 0) continue;  // half plane: (k, -k) pairs share one cos/sin couple
      const double ox = kx * wx_, oy = ky * wy_;
      kx_.push_back(kx);
      ky_.push_back(ky);
      w.push_back(std::exp(-0.5 * ell * ell * (ox * ox + oy * oy)));
    }
  double total = 0.0;
  for (double v : w) total += v;
  CounterRng rng(cfg.seed);
  for (std::size_t m = 0; m < w.size(); ++m) {
    const double s = std::sqrt(cfg.variance * w[m] / total);
    a_.push_back(s * rng.normal());
    b_.push_back(s * rng.normal());
  }
}

std::vector<double> GaussianRandomField::evaluate(const std::vector<double>& xs, const std::vector<double>& ys) const {
  const std::size_t nx = xs.size(), ny = ys.size();
  std::vector<double> out(nx * ny, mean_);
  std::vector<double> cx(nx), sx(nx), cy(ny), sy(ny);
  for (std::size_t m = 0; m < kx_.size(); ++m) {
    const double ox = kx_[m] * wx_, oy = ky_[m] * wy_;
    for (std::size_t i = 0; i < nx; ++i) {
      cx[i] = std::cos(ox * xs[i]);
      sx[i] = std::sin(ox * xs[i]);
    }
    for (std::size_t j = 0; j < ny; ++j) {
      cy[j] = std::cos(oy * ys[j]);
      sy[j] = std::sin(oy * ys[j]);
    }
    const double a = a_[m], b = b_[m];
    // a cos(ox x + oy y) + b sin(ox x + oy y), expanded separably.
    for (std::size_t j = 0; j < ny; ++j) {
      const double p = a * cy[j] + b * sy[j], q = b * cy[j] - a * sy[j];
      double* row = out.data() + j * nx;
      for (std::size_t i = 0; i < nx; ++i) row[i] += p * cx[i] + q * sx[i];
    }
  }
  return out;
}

double GaussianRandomField::value(double x, double y) const { return evaluate({x}, {y})[0]; }

ParameterField sample_grf(const StructuredGrid& grid, const GrfConfig& cfg, Sampling sampling, ParameterKind kind,
                          int order) {
  const GaussianRandomField f(grid, cfg);
  const TensorCoords c = sample_coords(grid, sampling, order);
  return tensor_to_parameter(f.evaluate(c.xs, c.ys), grid, sampling, kind, order);
}

void DarcyConfig::validate() const {
  grf.validate();
  if (!(high > 0.0) || !(low > 0.0)) throw InvalidArgument("conductivity phases must be positive");
}

ParameterField sample_darcy_conductivity(const StructuredGrid& grid, const DarcyConfig& cfg, Sampling sampling,
                                         int order) {
  cfg.validate();
  ParameterField p = sample_grf(grid, cfg.grf, sampling, ParameterKind::Conductivity, order);
  for (double& v : p.values.data) v = v >= 0.0 ? cfg.high : cfg.low;
  return p;
}

ParameterField sample_fiber_linear(double t0, double t1, const StructuredGrid& grid, Sampling sampling, int order) {
  check_angle(t0);
  check_angle(t1);
  const TensorCoords c = sample_coords(grid, sampling, order);
  const double width = grid.nx * grid.hx, xc = grid.x0 + 0.5 * width;
  std::vector<double> t(c.xs.size() * c.ys.size());
  for (std::size_t j = 0; j < c.ys.size(); ++j)
    for (std::size_t i = 0; i < c.xs.size(); ++i)
      t[j * c.xs.size() + i] = t0 + (t1 - t0) * std::abs(c.xs[i] - xc) / (0.5 * width);
  return tensor_to_parameter(t, grid, sampling, ParameterKind::FiberAngle, order);
}

std::vector<double> bspline_basis(int n, double u) {
  constexpr int p = 3;
  if (n < p + 1) throw InvalidArgument("cubic B-spline surface needs at least 4 control points per side");
  u = std::clamp(u, 0.0, 1.0);
  // Clamped uniform knots: p+1 zeros, interior i/(n-p), p+1 ones.
  std::vector<double> knots;
  for (int i = 0; i <= p; ++i) knots.push_back(0.0);
  for (int i = 1; i < n - p; ++i) knots.push_back(double(i) / (n - p));
  for (int i = 0; i <= p; ++i) knots.push_back(1.0);
  // Knot span with the right end folded into the last span.
  int span = p;
  while (span < n - 1 && u >= knots[span + 1]) ++span;
  // Cox-de Boor triangle on the nonzero functions of this span.
  std::vector<double> N(p + 1, 0.0), left(p + 1), right(p + 1);
  N[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    left[j] = u - knots[span + 1 - j];
    right[j] = knots[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = N[r] / (right[r + 1] + left[j - r]);
      N[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    N[j] = saved;
  }
  std::vector<double> out(n, 0.0);
  for (int r = 0; r <= p; ++r) out[span - p + r] = N[r];
  return out;
}

ParameterField sample_fiber_bspline(const std::vector<double>& control, int n, const StructuredGrid& grid,
                                    Sampling sampling, int order) {
  if (n < 4) throw InvalidArgument("cubic B-spline surface needs n >= 4");
  if (control.size() != std::size_t(n) * n) throw ShapeMismatch("control grid must hold n*n angles");
  for (double t : control) check_angle(t);
  const TensorCoords c = sample_coords(grid, sampling, order);
  const double w = grid.nx * grid.hx, h = grid.ny * grid.hy;
  std::vector<std::vector<double>> bx, by;
  for (double x : c.xs) bx.push_back(bspline_basis(n, (x - grid.x0) / w));
  for (double y : c.ys) by.push_back(bspline_basis(n, (y - grid.y0) / h));
  // Row-contract first: tmp[j][i] = sum_jj by[j][jj] c[jj][i], then over i.
  std::vector<double> t(c.xs.size() * c.ys.size(), 0.0);
  std::vector<double> tmp(n);
  for (std::size_t j = 0; j < c.ys.size(); ++j) {
    std::fill(tmp.begin(), tmp.end(), 0.0);
    for (int jj = 0; jj < n; ++jj)
      for (int ii = 0; ii < n; ++ii) tmp[ii] += by[j][jj] * control[std::size_t(jj) * n + ii];
    for (std::size_t i = 0; i < c.xs.size(); ++i) {
      double s = 0.0;
      for (int ii = 0; ii < n; ++ii) s += bx[i][ii] * tmp[ii];
      t[j * c.xs.size() + i] = s;
    }
  }
  return tensor_to_parameter(t, grid, sampling, ParameterKind::FiberAngle, order);
}

}  // namespace vol
