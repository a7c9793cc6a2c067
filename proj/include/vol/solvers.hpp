#pragma once

// Matrix-free steepest-descent / conjugate-gradient updates, a full CG
// solve used as the labeler, the restarted-CG baseline, and a dense
// assembly oracle for verification on small meshes.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "vol/fields.hpp"
#include "vol/matrix_free.hpp"

namespace vol {

struct IterationStep {
  int step = 0;
  double alpha = 0.0;
  double beta = 0.0;
  double residual_norm = 0.0;
};

struct IterationReport {
  std::vector<IterationStep> steps;
  double wall_seconds = 0.0;
  bool converged = false;

  int iterations() const { return static_cast<int>(steps.size()); }
};

struct UpdateResult {
  NodeField delta;
  IterationReport report;
};

// n steps of steepest descent from the masked residual R of a. Returns the
// accumulated update; the caller's a is not modified.
UpdateResult sd_steps(const NodeField& residual, const NodeField& a, const SystemOperator& op, int n);

// n steps of conjugate gradient, conjugacy history local to the call.
UpdateResult cg_steps(const NodeField& residual, const NodeField& a, const SystemOperator& op, int n);

struct SolveResult {
  NodeField solution;
  IterationReport report;
};

// Plain CG to ||R|| <= tol * ||mask(P)||; hitting maxiter is reported, not thrown.
SolveResult cg_solve(const SystemOperator& op, const NodeField& a0, double tol = 1e-10,
                     int maxiter = 100000);

struct DenseSystem {
  int channels = 0, rows = 0, cols = 0;
  Eigen::MatrixXd K;
  Eigen::VectorXd P;
  std::vector<int> free_index;
  NodeField shift;

  std::size_t dofs() const { return std::size_t(channels) * rows * cols; }
};

constexpr std::size_t kDenseDofLimit = 20000;

// Element-by-element quadrature and scatter-add; same tables as the
// matrix-free path.
DenseSystem assemble_dense(const Problem& problem);

// Cholesky on the free block; constrained entries take their shift values.
NodeField dense_solve(const DenseSystem& sys);

Eigen::VectorXd flatten(const Field3& f);
NodeField unflatten(const Eigen::VectorXd& v, int channels, int rows, int cols);

enum class BaselineInit { ShiftMean, RandomNormal };

struct BaselineResult {
  // [epoch] mean relative L2 error over samples; entry 0 is the initial guess.
  std::vector<double> mean_rel_l2;
  std::vector<double> worst_rel_l2;
  // [epoch][sample] energy-norm error ||a - a*||_K.
  std::vector<std::vector<double>> energy_error;
};

// CG(n) run for `epochs` rounds per sample, discarding conjugacy between
// rounds. Random-normal init draws N(0,1) per free entry from `seed`.
BaselineResult restarted_cg_baseline(const std::vector<const SystemOperator*>& ops,
                                     const std::vector<NodeField>& references, int n, int epochs,
                                     BaselineInit init, const NodeField* shift_mean,
                                     std::uint64_t seed);

void write_report_csv(const IterationReport& report, const std::string& path);

}  // namespace vol
