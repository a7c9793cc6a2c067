#pragma once

// Constitutive maps and benchmark problem definitions: scalar diffusion
// (steady heat, Darcy) and plane-stress variable-stiffness laminates.

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "vol/fields.hpp"
#include "vol/mesh.hpp"

namespace vol {

using Mat3 = std::array<double, 9>;  // row-major 3x3

struct LaminaProperties {
  double E1 = 181000.0;  // MPa
  double E2 = 10270.0;
  double G12 = 7170.0;
  double nu12 = 0.28;
  double thickness = 0.125;  // mm

  void validate() const;
};

Mat3 compliance_matrix(const LaminaProperties& p);
// C12 = S12^-1 in principal material axes.
Mat3 plane_stress_stiffness(const LaminaProperties& p);
// Stress transformation T(theta); T(theta)^-1 = T(-theta).
Mat3 rotation_matrix(double theta);
// C_xy = T^-1 C12 T^-T
Mat3 rotated_stiffness(const Mat3& c12, double theta);

// General2x2 holds a possibly nonsymmetric conductivity (k00, k01, k10, k11);
// such problems have a weak form but no energy functional.
enum class MaterialKind { IsotropicScalar, Anisotropic2x2, PlaneStress3x3, General2x2 };

int material_entries(MaterialKind kind);

// Constitutive data per Gauss point, stored [entry][slot][ey][ex]. Symmetric
// matrices keep their upper triangle: (k00, k01, k11) or
// (c00, c01, c02, c11, c12, c22).
struct MaterialField {
  MaterialKind kind = MaterialKind::IsotropicScalar;
  int n_slots = 0, ny = 0, nx = 0;
  std::vector<double> data;

  MaterialField() = default;
  MaterialField(MaterialKind k, int slots, int ny_, int nx_)
      : kind(k), n_slots(slots), ny(ny_), nx(nx_),
        data(std::size_t(material_entries(k)) * slots * ny_ * nx_, 0.0) {}

  std::size_t points() const { return std::size_t(n_slots) * ny * nx; }
  bool symmetric() const { return kind != MaterialKind::General2x2; }
  double& entry(int e, std::size_t point) { return data[e * points() + point]; }
  double entry(int e, std::size_t point) const { return data[e * points() + point]; }

  // Throws InvalidMaterial unless every point is positive definite (for
  // General2x2: its symmetric part).
  void validate() const;
};

MaterialField uniform_material(MaterialKind kind, const std::vector<double>& entries, int slots,
                               int ny, int nx);

enum class ParameterKind { Source, Conductivity, FiberAngle };
enum class Sampling { GaussPoints, Nodes };

// Gauss sampling: one channel per Gauss slot at element resolution.
// Node sampling: one channel per component at node resolution.
struct ParameterField {
  ParameterKind kind = ParameterKind::Source;
  Sampling sampling = Sampling::GaussPoints;
  Field3 values;
};

std::string to_string(ParameterKind k);

MaterialField fiber_angle_to_material(const ParameterField& theta, const LaminaProperties& p);

// Flux kappa * grad T per Gauss point; input from eval_at_gauss on one channel.
GaussField diffusion_flux_map(const GaussField& g, const MaterialField& mat);
// Engineering strain (exx, eyy, gxy) from a two-channel eval_at_gauss field.
GaussField strain_map(const GaussField& g);
// sigma = t * C_xy * eps from a two-channel eval_at_gauss field, with
// (sxx, syy, sxy) per slot.
GaussField stress_map(const GaussField& g, const MaterialField& mat, double thickness);

enum class Edge { Left, Right, Bottom, Top };

std::string to_string(Edge e);
Edge edge_from_string(const std::string& s);

// Prescribed boundary flux / traction on one edge. Either one constant per
// solution channel, or channel-major samples at every node of the edge.
struct EdgeLoad {
  Edge edge = Edge::Right;
  std::vector<double> values;
  bool per_node = false;
};

struct LoadSpec {
  // Body source per solution channel at Gauss points; empty means zero.
  GaussField volumetric;
  std::vector<EdgeLoad> neumann;
};

enum class ProblemKind { Heat, Darcy, ElasticityA, ElasticityB };

std::string to_string(ProblemKind k);
ProblemKind problem_from_string(const std::string& s);
PhysicsKind physics_of(ProblemKind k);
ParameterKind parameter_of(ProblemKind k);

// Declared benchmark defaults; every field is echoed into run metadata.
struct ProblemConfig {
  double heat_conductivity = 1.0;
  double darcy_source = 1.0;
  LaminaProperties lamina;
  double plate_size = 100.0;  // mm, elasticity
  double domain_size = 1.0;   // heat / Darcy unit square
  // Empty means the benchmark default: all edges for heat/Darcy, left for
  // elasticity.
  std::vector<Edge> dirichlet_edges;
  Edge traction_edge = Edge::Right;
  std::array<double, 2> traction = {1.0, 0.0};  // N/mm
};

StructuredGrid default_grid(ProblemKind kind, int nodes_per_side, const ProblemConfig& cfg = {});

struct Problem {
  ProblemKind kind = ProblemKind::Heat;
  std::shared_ptr<const Discretization> disc;
  MaterialField material;
  double thickness = 1.0;
  LoadSpec load;
  MaskSpec mask;

  const StructuredGrid& grid() const { return disc->grid; }
  PhysicsKind physics() const { return disc->physics; }
  int channels() const { return disc->channels(); }
};

MaskSpec dirichlet_mask(const StructuredGrid& grid, int channels, const std::vector<Edge>& edges);

Problem problem_factory(ProblemKind kind, std::shared_ptr<const Discretization> disc,
                        const ParameterField& parameter, const ProblemConfig& cfg = {});

}  // namespace vol
