#include "vol/physics.hpp"

#include <algorithm>
#include <cmath>

#include "vol/errors.hpp"

namespace vol {

namespace {

Mat3 matmul(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double s = 0.0;
      for (int k = 0; k < 3; ++k) s += a[i * 3 + k] * b[k * 3 + j];
      c[i * 3 + j] = s;
    }
  return c;
}

Mat3 transpose(const Mat3& a) {
  Mat3 t{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) t[j * 3 + i] = a[i * 3 + j];
  return t;
}

bool positive_definite_3(const double c00, const double c01, const double c02, const double c11,
                         const double c12, const double c22) {
  const double m1 = c00;
  const double m2 = c00 * c11 - c01 * c01;
  const double m3 = c00 * (c11 * c22 - c12 * c12) - c01 * (c01 * c22 - c12 * c02) +
                    c02 * (c01 * c12 - c11 * c02);
  return m1 > 0.0 && m2 > 0.0 && m3 > 0.0;
}

}  // namespace

void LaminaProperties::validate() const {
  if (!(E1 > 0.0) || !(E2 > 0.0) || !(G12 > 0.0) || !(thickness > 0.0))
    throw InvalidMaterial("lamina moduli and thickness must be positive");
  if (!(1.0 - nu12 * nu12 * E2 / E1 > 0.0))
    throw InvalidMaterial("lamina compliance is singular (1 - nu12^2 E2/E1 <= 0)");
}

Mat3 compliance_matrix(const LaminaProperties& p) {
  return {1.0 / p.E1,      -p.nu12 / p.E1, 0.0,  //
          -p.nu12 / p.E1,  1.0 / p.E2,     0.0,  //
          0.0,             0.0,            1.0 / p.G12};
}

Mat3 plane_stress_stiffness(const LaminaProperties& p) {
  p.validate();
  const Mat3 s = compliance_matrix(p);
  // Closed-form inverse of the block [[a b][b d]] (+) [g].
  const double det = s[0] * s[4] - s[1] * s[3];
  if (!(det > 0.0)) throw InvalidMaterial("singular compliance matrix");
  return {s[4] / det,  -s[1] / det, 0.0,  //
          -s[3] / det, s[0] / det,  0.0,  //
          0.0,         0.0,         1.0 / s[8]};
}

Mat3 rotation_matrix(double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  return {c * c,  s * s, 2.0 * s * c,   //
          s * s,  c * c, -2.0 * s * c,  //
          -s * c, s * c, c * c - s * s};
}

Mat3 rotated_stiffness(const Mat3& c12, double theta) {
  const Mat3 tinv = rotation_matrix(-theta);
  Mat3 c = matmul(matmul(tinv, c12), transpose(tinv));
  // Exact symmetry; the triple product leaves round-off in the lower triangle.
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j) {
      const double m = 0.5 * (c[i * 3 + j] + c[j * 3 + i]);
      c[i * 3 + j] = c[j * 3 + i] = m;
    }
  return c;
}

int material_entries(MaterialKind kind) {
  switch (kind) {
    case MaterialKind::IsotropicScalar: return 1;
    case MaterialKind::Anisotropic2x2: return 3;
    case MaterialKind::PlaneStress3x3: return 6;
    case MaterialKind::General2x2: return 4;
  }
  return 0;
}

void MaterialField::validate() const {
  const std::size_t n = points();
  if (data.size() != n * material_entries(kind)) throw ShapeMismatch("material field size");
  for (std::size_t p = 0; p < n; ++p) {
    bool ok = true;
    switch (kind) {
      case MaterialKind::IsotropicScalar: ok = entry(0, p) > 0.0; break;
      case MaterialKind::Anisotropic2x2:
        ok = entry(0, p) > 0.0 && entry(0, p) * entry(2, p) - entry(1, p) * entry(1, p) > 0.0;
        break;
      case MaterialKind::PlaneStress3x3:
        ok = positive_definite_3(entry(0, p), entry(1, p), entry(2, p), entry(3, p), entry(4, p),
                                 entry(5, p));
        break;
      case MaterialKind::General2x2: {
        const double off = 0.5 * (entry(1, p) + entry(2, p));
        ok = entry(0, p) > 0.0 && entry(0, p) * entry(3, p) - off * off > 0.0;
        break;
      }
    }
    if (!ok) throw InvalidMaterial("material not positive definite at Gauss point " + std::to_string(p));
  }
}

MaterialField uniform_material(MaterialKind kind, const std::vector<double>& entries, int slots,
                               int ny, int nx) {
  if (int(entries.size()) != material_entries(kind)) throw ShapeMismatch("material entry count");
  MaterialField m(kind, slots, ny, nx);
  for (int e = 0; e < int(entries.size()); ++e)
    for (std::size_t p = 0; p < m.points(); ++p) m.entry(e, p) = entries[e];
  return m;
}

std::string to_string(ParameterKind k) {
  switch (k) {
    case ParameterKind::Source: return "source";
    case ParameterKind::Conductivity: return "conductivity";
    case ParameterKind::FiberAngle: return "fiber-angle";
  }
  return "?";
}

MaterialField fiber_angle_to_material(const ParameterField& theta, const LaminaProperties& p) {
  if (theta.kind != ParameterKind::FiberAngle) throw InvalidArgument("expected a fiber-angle field");
  if (theta.sampling != Sampling::GaussPoints)
    throw InvalidArgument("fiber angles must be sampled at Gauss points");
  const Mat3 c12 = plane_stress_stiffness(p);
  const auto& v = theta.values;
  MaterialField m(MaterialKind::PlaneStress3x3, v.channels, v.rows, v.cols);
  for (std::size_t i = 0; i < m.points(); ++i) {
    const Mat3 c = rotated_stiffness(c12, v.data[i]);
    m.entry(0, i) = c[0];
    m.entry(1, i) = c[1];
    m.entry(2, i) = c[2];
    m.entry(3, i) = c[4];
    m.entry(4, i) = c[5];
    m.entry(5, i) = c[8];
  }
  m.validate();
  return m;
}

namespace {

void require_material_grid(const GaussField& g, const MaterialField& mat) {
  if (g.n_slots != mat.n_slots || g.rows != mat.ny || g.cols != mat.nx)
    throw ShapeMismatch("material field does not match Gauss field");
}

}  // namespace

GaussField diffusion_flux_map(const GaussField& g, const MaterialField& mat) {
  if (g.quantities() != kTrialQuantities) throw ShapeMismatch("flux map needs a one-channel Gauss field");
  if (mat.kind == MaterialKind::PlaneStress3x3) throw InvalidArgument("flux map needs a scalar-diffusion material");
  require_material_grid(g, mat);
  GaussField out(2, g.n_slots, g.rows, g.cols);
  const std::size_t n = mat.points();
  const double* gx = g.data.data() + kDx * n;
  const double* gy = g.data.data() + kDy * n;
  double* qx = out.data.data();
  double* qy = out.data.data() + n;
  if (mat.kind == MaterialKind::IsotropicScalar) {
    const double* k = mat.data.data();
    for (std::size_t p = 0; p < n; ++p) {
      qx[p] = k[p] * gx[p];
      qy[p] = k[p] * gy[p];
    }
  } else if (mat.kind == MaterialKind::Anisotropic2x2) {
    const double* k00 = mat.data.data();
    const double* k01 = k00 + n;
    const double* k11 = k01 + n;
    for (std::size_t p = 0; p < n; ++p) {
      qx[p] = k00[p] * gx[p] + k01[p] * gy[p];
      qy[p] = k01[p] * gx[p] + k11[p] * gy[p];
    }
  } else {
    const double* k00 = mat.data.data();
    const double* k01 = k00 + n;
    const double* k10 = k01 + n;
    const double* k11 = k10 + n;
    for (std::size_t p = 0; p < n; ++p) {
      qx[p] = k00[p] * gx[p] + k01[p] * gy[p];
      qy[p] = k10[p] * gx[p] + k11[p] * gy[p];
    }
  }
  return out;
}

GaussField strain_map(const GaussField& g) {
  if (g.quantities() != 2 * kTrialQuantities) throw ShapeMismatch("strain map needs a two-channel Gauss field");
  GaussField eps(3, g.n_slots, g.rows, g.cols);
  const std::size_t n = std::size_t(g.n_slots) * g.rows * g.cols;
  const double* ux = g.data.data() + (0 * kTrialQuantities + kDx) * n;
  const double* uy = g.data.data() + (0 * kTrialQuantities + kDy) * n;
  const double* vx = g.data.data() + (1 * kTrialQuantities + kDx) * n;
  const double* vy = g.data.data() + (1 * kTrialQuantities + kDy) * n;
  for (std::size_t p = 0; p < n; ++p) {
    eps.data[p] = ux[p];
    eps.data[n + p] = vy[p];
    eps.data[2 * n + p] = uy[p] + vx[p];
  }
  return eps;
}

GaussField stress_map(const GaussField& g, const MaterialField& mat, double thickness) {
  if (mat.kind != MaterialKind::PlaneStress3x3) throw InvalidArgument("stress map needs a plane-stress material");
  GaussField eps = strain_map(g);
  require_material_grid(eps, mat);
  const std::size_t n = mat.points();
  GaussField sig(3, g.n_slots, g.rows, g.cols);
  const double* c = mat.data.data();
  for (std::size_t p = 0; p < n; ++p) {
    const double e0 = eps.data[p], e1 = eps.data[n + p], e2 = eps.data[2 * n + p];
    const double c00 = c[p], c01 = c[n + p], c02 = c[2 * n + p];
    const double c11 = c[3 * n + p], c12 = c[4 * n + p], c22 = c[5 * n + p];
    sig.data[p] = thickness * (c00 * e0 + c01 * e1 + c02 * e2);
    sig.data[n + p] = thickness * (c01 * e0 + c11 * e1 + c12 * e2);
    sig.data[2 * n + p] = thickness * (c02 * e0 + c12 * e1 + c22 * e2);
  }
  return sig;
}

std::string to_string(Edge e) {
  switch (e) {
    case Edge::Left: return "left";
    case Edge::Right: return "right";
    case Edge::Bottom: return "bottom";
    case Edge::Top: return "top";
  }
  return "?";
}

Edge edge_from_string(const std::string& s) {
  if (s == "left") return Edge::Left;
  if (s == "right") return Edge::Right;
  if (s == "bottom") return Edge::Bottom;
  if (s == "top") return Edge::Top;
  throw InvalidArgument("unknown edge '" + s + "'");
}

std::string to_string(ProblemKind k) {
  switch (k) {
    case ProblemKind::Heat: return "heat";
    case ProblemKind::Darcy: return "darcy";
    case ProblemKind::ElasticityA: return "elasticity-a";
    case ProblemKind::ElasticityB: return "elasticity-b";
  }
  return "?";
}

ProblemKind problem_from_string(const std::string& s) {
  if (s == "heat") return ProblemKind::Heat;
  if (s == "darcy") return ProblemKind::Darcy;
  if (s == "elasticity-a") return ProblemKind::ElasticityA;
  if (s == "elasticity-b") return ProblemKind::ElasticityB;
  throw InvalidArgument("unknown problem kind '" + s + "'");
}

PhysicsKind physics_of(ProblemKind k) {
  return (k == ProblemKind::ElasticityA || k == ProblemKind::ElasticityB) ? PhysicsKind::PlaneStress
                                                                          : PhysicsKind::ScalarDiffusion;
}

ParameterKind parameter_of(ProblemKind k) {
  switch (k) {
    case ProblemKind::Heat: return ParameterKind::Source;
    case ProblemKind::Darcy: return ParameterKind::Conductivity;
    default: return ParameterKind::FiberAngle;
  }
}

StructuredGrid default_grid(ProblemKind kind, int nodes_per_side, const ProblemConfig& cfg) {
  if (nodes_per_side < 2) throw InvalidArgument("resolution must be at least 2 nodes per side");
  const double size = physics_of(kind) == PhysicsKind::PlaneStress ? cfg.plate_size : cfg.domain_size;
  return StructuredGrid::uniform(nodes_per_side - 1, nodes_per_side - 1, size, size);
}

MaskSpec dirichlet_mask(const StructuredGrid& grid, int channels, const std::vector<Edge>& edges) {
  MaskSpec m{NodeField(channels, grid.node_rows(), grid.node_cols(), 1.0),
             NodeField(channels, grid.node_rows(), grid.node_cols(), 0.0)};
  for (int c = 0; c < channels; ++c) {
    for (Edge e : edges) {
      switch (e) {
        case Edge::Left:
          for (int j = 0; j <= grid.ny; ++j) m.mask.at(c, j, 0) = 0.0;
          break;
        case Edge::Right:
          for (int j = 0; j <= grid.ny; ++j) m.mask.at(c, j, grid.nx) = 0.0;
          break;
        case Edge::Bottom:
          for (int i = 0; i <= grid.nx; ++i) m.mask.at(c, 0, i) = 0.0;
          break;
        case Edge::Top:
          for (int i = 0; i <= grid.nx; ++i) m.mask.at(c, grid.ny, i) = 0.0;
          break;
      }
    }
  }
  return m;
}

Problem problem_factory(ProblemKind kind, std::shared_ptr<const Discretization> disc,
                        const ParameterField& parameter, const ProblemConfig& cfg) {
  if (!disc) throw InvalidArgument("missing discretization");
  if (disc->physics != physics_of(kind)) throw InvalidArgument("discretization physics does not match problem kind");
  if (parameter.kind != parameter_of(kind))
    throw InvalidArgument("problem " + to_string(kind) + " expects a " + to_string(parameter_of(kind)) +
                          " parameter, got " + to_string(parameter.kind));
  if (parameter.sampling != Sampling::GaussPoints)
    throw InvalidArgument("problem parameters must be sampled at Gauss points");
  const auto& g = disc->grid;
  const int slots = disc->n_slots();
  const auto& v = parameter.values;
  if (v.channels != slots || v.rows != g.ny || v.cols != g.nx)
    throw ShapeMismatch("parameter field does not match the discretization");

  Problem p;
  p.kind = kind;
  p.disc = disc;
  switch (kind) {
    case ProblemKind::Heat: {
      p.material = uniform_material(MaterialKind::IsotropicScalar, {cfg.heat_conductivity}, slots, g.ny, g.nx);
      p.load.volumetric = GaussField(1, slots, g.ny, g.nx);
      p.load.volumetric.data = v.data;
      break;
    }
    case ProblemKind::Darcy: {
      p.material = MaterialField(MaterialKind::IsotropicScalar, slots, g.ny, g.nx);
      p.material.data = v.data;
      p.load.volumetric = GaussField(1, slots, g.ny, g.nx);
      std::fill(p.load.volumetric.data.begin(), p.load.volumetric.data.end(), cfg.darcy_source);
      break;
    }
    case ProblemKind::ElasticityA:
    case ProblemKind::ElasticityB: {
      p.material = fiber_angle_to_material(parameter, cfg.lamina);
      p.thickness = cfg.lamina.thickness;
      p.load.neumann.push_back(EdgeLoad{cfg.traction_edge, {cfg.traction[0], cfg.traction[1]}, false});
      break;
    }
  }
  p.material.validate();
  std::vector<Edge> edges = cfg.dirichlet_edges;
  if (edges.empty()) {
    if (physics_of(kind) == PhysicsKind::PlaneStress)
      edges = {Edge::Left};
    else
      edges = {Edge::Left, Edge::Right, Edge::Bottom, Edge::Top};
  }
  p.mask = dirichlet_mask(g, disc->channels(), edges);
  p.mask.validate();
  return p;
}

}  // namespace vol
