#pragma once

// Matrix-free evaluation of the discrete system. The Ritz path integrates
// energies by quadrature (functional, quadratic forms); the Galerkin path
// convolves physics feature maps with the test kernel (residuals, K*p).
// No global matrix is ever formed here.

#include "vol/fields.hpp"
#include "vol/mesh.hpp"
#include "vol/physics.hpp"

namespace vol {

// Values and physical gradients of every channel at every Gauss point:
// quantity index = channel * 3 + {value, d/dx, d/dy}.
GaussField eval_at_gauss(const NodeField& a, const TrialKernel& kernel);

// Multiplies each slot by H_l * |J_l^e|.
void weight_by_quadrature(GaussField& f, const GaussRule& rule, const JacobianField& jac);

// Gathers weighted feature maps back to nodes through the test kernel,
// with one ring of zero ghost elements around the mesh.
NodeField test_convolution(const GaussField& weighted_features, const TestKernel& kernel);

// Same gather with the test-function values, one output channel per
// source quantity.
NodeField source_convolution(const GaussField& weighted_source, const TestKernel& kernel);

// Flux (scalar physics) or thickness-scaled stress (plane stress).
GaussField physics_features(const GaussField& at_gauss, const Problem& problem);

// Consistent nodal load: volumetric source plus Neumann edge terms (2-point
// Gauss rule per edge segment).
NodeField load_vector(const Problem& problem);
NodeField neumann_load(const Problem& problem);

// Ritz: 1/2 sum H |J| eps^T D eps - sum H |J| f.u - boundary work.
double system_functional(const NodeField& a, const Problem& problem);

// R = K a - P (unmasked).
NodeField residual_galerkin(const NodeField& a, const Problem& problem);
// K p.
NodeField matvec(const NodeField& p, const Problem& problem);
// p^T K p by quadrature of the strain energy density.
double quadratic_form(const NodeField& p, const Problem& problem);

// Caches the load vector of one problem; everything the solvers and the
// trainer touch per sample goes through here.
class SystemOperator {
 public:
  explicit SystemOperator(Problem problem);

  const Problem& problem() const { return problem_; }
  const MaskSpec& mask() const { return problem_.mask; }
  const NodeField& load() const { return load_; }
  const StructuredGrid& grid() const { return problem_.grid(); }
  int channels() const { return problem_.channels(); }

  NodeField residual(const NodeField& a) const;
  NodeField masked_residual(const NodeField& a) const;
  NodeField matvec(const NodeField& p) const;
  NodeField masked_matvec(const NodeField& p) const;
  double quadratic_form(const NodeField& p) const;
  double functional(const NodeField& a) const;

  NodeField zeros() const { return NodeField::zeros(grid(), channels()); }

 private:
  NodeField stiffness_action(const NodeField& a) const;

  Problem problem_;
  NodeField load_;
};

}  // namespace vol
