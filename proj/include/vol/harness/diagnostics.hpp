#pragma once

// Self-checks exposed on the command line: matrix-free vs. dense assembly,
// and reverse-mode gradients vs. central finite differences.

#include <cstdint>

#include "vol/physics.hpp"

namespace vol {

struct OracleDiscrepancy {
  double residual = 0.0;
  double matvec = 0.0;
  double load = 0.0;
  double functional = 0.0;  // NaN-free; 0 when the functional is undefined

  double max() const;
};

// Worst relative discrepancy (infinity norm) over `n_inputs` random inputs
// and random nodal vectors.
OracleDiscrepancy oracle_check(ProblemKind kind, int nodes_per_side, int n_inputs, std::uint64_t seed);

struct GradCheckResult {
  double model_max_rel = 0.0;  // model_vjp vs. central differences
  double dm_max_rel = 0.0;     // d||R||/da vs. central differences
};

GradCheckResult gradient_check(std::uint64_t seed, double h = 1e-6);

}  // namespace vol
