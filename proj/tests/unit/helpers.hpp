#pragma once

// Small builders shared by the unit tests.

#include <functional>
#include <memory>

#include "vol/harness/random.hpp"
#include "vol/harness/random_fields.hpp"
#include "vol/matrix_free.hpp"
#include "vol/physics.hpp"

namespace vol::test {

// Gauss-sampled parameter field from a function of the physical coordinates.
inline ParameterField gauss_param(const Discretization& d, ParameterKind kind,
                                  const std::function<double(double, double)>& f) {
  ParameterField p;
  p.kind = kind;
  p.sampling = Sampling::GaussPoints;
  p.values = Field3(d.n_slots(), d.grid.ny, d.grid.nx);
  for (int l = 0; l < d.n_slots(); ++l)
    for (int ey = 0; ey < d.grid.ny; ++ey)
      for (int ex = 0; ex < d.grid.nx; ++ex) {
        const auto x = d.gauss_point(l, ey, ex);
        p.values.at(l, ey, ex) = f(x[0], x[1]);
      }
  return p;
}

inline ParameterField const_param(const Discretization& d, ParameterKind kind, double v) {
  return gauss_param(d, kind, [v](double, double) { return v; });
}

inline std::shared_ptr<const Discretization> disc_for(ProblemKind kind, int nodes, const ProblemConfig& cfg = {}) {
  return make_discretization(default_grid(kind, nodes, cfg), physics_of(kind));
}

// A problem with a random (but valid) parameter field.
inline Problem random_problem(ProblemKind kind, int nodes, std::uint64_t seed, const ProblemConfig& cfg = {}) {
  auto d = disc_for(kind, nodes, cfg);
  CounterRng rng(seed);
  ParameterField p;
  switch (kind) {
    case ProblemKind::Heat: p = sample_grf(d->grid, GrfConfig{0.3, 1.0, 0.0, seed}); break;
    case ProblemKind::Darcy: {
      DarcyConfig dc;
      dc.grf.seed = seed;
      p = sample_darcy_conductivity(d->grid, dc);
      break;
    }
    default: p = gauss_param(*d, ParameterKind::FiberAngle, [&](double, double) { return rng.uniform(-1.5, 1.5); });
  }
  return problem_factory(kind, d, p, cfg);
}

inline NodeField random_nodes(int channels, int rows, int cols, std::uint64_t seed) {
  CounterRng rng(seed);
  NodeField f(channels, rows, cols);
  for (auto& v : f.data) v = rng.normal();
  return f;
}

}  // namespace vol::test
