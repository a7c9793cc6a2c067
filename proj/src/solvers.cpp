#include "vol/solvers.hpp"

#include <chrono>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>

#include "vol/errors.hpp"
#include "vol/harness/random.hpp"

namespace vol {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

UpdateResult sd_steps(const NodeField& residual, const NodeField& a_in, const SystemOperator& op, int n) {
  if (n < 1) throw InvalidArgument("steepest descent needs n >= 1");
  require_same_shape(residual, a_in, "sd_steps");
  const auto t0 = Clock::now();
  UpdateResult out{op.zeros(), {}};
  NodeField a = a_in;
  NodeField r = residual;
  scale(r, -1.0);
  for (int i = 1; i <= n; ++i) {
    const double rr = dot(r, r);
    if (rr == 0.0) {
      out.report.converged = true;
      break;
    }
    const double rkr = op.quadratic_form(r);
    if (!(rkr > 0.0)) throw SolverBreakdown("steepest descent: R^T K R = " + std::to_string(rkr) + " <= 0");
    const double alpha = rr / rkr;
    axpy(alpha, r, out.delta);
    IterationStep step{i, alpha, 0.0, std::sqrt(rr)};
    if (n > 1) {
      axpy(alpha, r, a);
      r = op.masked_residual(a);
      scale(r, -1.0);
      step.residual_norm = norm2(r);
    }
    out.report.steps.push_back(step);
  }
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

UpdateResult cg_steps(const NodeField& residual, const NodeField& a, const SystemOperator& op, int n) {
  if (n < 1) throw InvalidArgument("conjugate gradient needs n >= 1");
  require_same_shape(residual, a, "cg_steps");
  const auto t0 = Clock::now();
  UpdateResult out{op.zeros(), {}};
  NodeField r = residual;
  scale(r, -1.0);
  NodeField p = r;
  double rr = dot(r, r);
  for (int i = 1; i <= n; ++i) {
    if (rr == 0.0) {
      out.report.converged = true;
      break;
    }
    const double pkp = op.quadratic_form(p);
    if (!(pkp > 0.0)) throw SolverBreakdown("conjugate gradient: p^T K p = " + std::to_string(pkp) + " <= 0");
    const double alpha = rr / pkp;
    axpy(alpha, p, out.delta);
    IterationStep step{i, alpha, 0.0, std::sqrt(rr)};
    if (n > 1) {
      const NodeField kp = op.masked_matvec(p);
      axpy(-alpha, kp, r);
      const double rr_new = dot(r, r);
      const double beta = rr_new / rr;
      rr = rr_new;
      // p = R + beta p
      for (std::size_t k = 0; k < p.size(); ++k) p.data[k] = r.data[k] + beta * p.data[k];
      step.beta = beta;
      step.residual_norm = std::sqrt(rr_new);
    }
    out.report.steps.push_back(step);
  }
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

SolveResult cg_solve(const SystemOperator& op, const NodeField& a0, double tol, int maxiter) {
  const auto t0 = Clock::now();
  SolveResult out{apply_shift_bc(a0, op.mask()), {}};
  NodeField& a = out.solution;
  double ref = norm2(apply_mask(op.load(), op.mask()));
  if (ref == 0.0) ref = 1.0;

  NodeField r = op.masked_residual(a);
  scale(r, -1.0);
  double rr = dot(r, r);
  if (std::sqrt(rr) <= tol * ref) {
    out.report.converged = true;
    out.report.wall_seconds = seconds_since(t0);
    return out;
  }
  NodeField p = r;
  for (int it = 1; it <= maxiter; ++it) {
    const NodeField kp = op.masked_matvec(p);
    const double pkp = dot(p, kp);
    if (!(pkp > 0.0)) throw SolverBreakdown("cg_solve: p^T K p = " + std::to_string(pkp) + " <= 0");
    const double alpha = rr / pkp;
    axpy(alpha, p, a);
    axpy(-alpha, kp, r);
    const double rr_new = dot(r, r);
    const double beta = rr_new / rr;
    rr = rr_new;
    out.report.steps.push_back({it, alpha, beta, std::sqrt(rr)});
    if (std::sqrt(rr) <= tol * ref) {
      out.report.converged = true;
      break;
    }
    for (std::size_t k = 0; k < p.size(); ++k) p.data[k] = r.data[k] + beta * p.data[k];
  }
  out.report.wall_seconds = seconds_since(t0);
  return out;
}

Eigen::VectorXd flatten(const Field3& f) {
  return Eigen::Map<const Eigen::VectorXd>(f.data.data(), Eigen::Index(f.size()));
}

NodeField unflatten(const Eigen::VectorXd& v, int channels, int rows, int cols) {
  NodeField f(channels, rows, cols);
  if (std::size_t(v.size()) != f.size()) throw ShapeMismatch("unflatten size");
  for (std::size_t i = 0; i < f.size(); ++i) f.data[i] = v[Eigen::Index(i)];
  return f;
}

DenseSystem assemble_dense(const Problem& problem) {
  const auto& d = *problem.disc;
  const auto& g = d.grid;
  const int nc = problem.channels();
  DenseSystem sys;
  sys.channels = nc;
  sys.rows = g.node_rows();
  sys.cols = g.node_cols();
  const std::size_t n = sys.dofs();
  if (n > kDenseDofLimit)
    throw InvalidArgument("dense assembly limited to " + std::to_string(kDenseDofLimit) + " dofs, got " +
                          std::to_string(n));
  sys.K = Eigen::MatrixXd::Zero(Eigen::Index(n), Eigen::Index(n));
  sys.P = Eigen::VectorXd::Zero(Eigen::Index(n));
  const int ns = d.n_slots();
  const auto& mat = problem.material;
  const int edofs = kQ1Nodes * nc;
  const int nstrain = feature_channels(d.physics);

  auto dof = [&](int c, int j, int i) { return (c * sys.rows + j) * sys.cols + i; };

  for (int ey = 0; ey < g.ny; ++ey) {
    for (int ex = 0; ex < g.nx; ++ex) {
      Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(edofs, edofs);
      Eigen::VectorXd pe = Eigen::VectorXd::Zero(edofs);
      for (int l = 0; l < ns; ++l) {
        const std::size_t pt = (std::size_t(l) * g.ny + ey) * g.nx + ex;
        const double w = d.rule.weights[l] * d.jac.at(l, ey, ex);
        // B maps element dofs (channel-major, local node j) to strain-like
        // quantities; D is the constitutive matrix at this point.
        Eigen::MatrixXd B = Eigen::MatrixXd::Zero(nstrain, edofs);
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(nstrain, nstrain);
        for (int j = 0; j < kQ1Nodes; ++j) {
          const double bx = d.trial.entry(l, kDx, j / 2, j % 2);
          const double by = d.trial.entry(l, kDy, j / 2, j % 2);
          if (d.physics == PhysicsKind::ScalarDiffusion) {
            B(0, j) = bx;
            B(1, j) = by;
          } else {
            B(0, j) = bx;
            B(2, j) = by;
            B(1, kQ1Nodes + j) = by;
            B(2, kQ1Nodes + j) = bx;
          }
        }
        switch (mat.kind) {
          case MaterialKind::IsotropicScalar:
            D(0, 0) = D(1, 1) = mat.entry(0, pt);
            break;
          case MaterialKind::Anisotropic2x2:
            D << mat.entry(0, pt), mat.entry(1, pt), mat.entry(1, pt), mat.entry(2, pt);
            break;
          case MaterialKind::General2x2:
            D << mat.entry(0, pt), mat.entry(1, pt), mat.entry(2, pt), mat.entry(3, pt);
            break;
          case MaterialKind::PlaneStress3x3: {
            const double c00 = mat.entry(0, pt), c01 = mat.entry(1, pt), c02 = mat.entry(2, pt);
            const double c11 = mat.entry(3, pt), c12 = mat.entry(4, pt), c22 = mat.entry(5, pt);
            D << c00, c01, c02, c01, c11, c12, c02, c12, c22;
            D *= problem.thickness;
            break;
          }
        }
        ke.noalias() += w * B.transpose() * D * B;
        if (!problem.load.volumetric.data.empty()) {
          for (int c = 0; c < nc; ++c) {
            const double f = problem.load.volumetric.q(c, l, ey, ex);
            for (int j = 0; j < kQ1Nodes; ++j)
              pe(c * kQ1Nodes + j) += w * d.table.values[l][j] * f;
          }
        }
      }
      int gidx[4 * 2];
      for (int c = 0; c < nc; ++c)
        for (int j = 0; j < kQ1Nodes; ++j) gidx[c * kQ1Nodes + j] = dof(c, ey + j / 2, ex + j % 2);
      for (int r = 0; r < edofs; ++r) {
        sys.P(gidx[r]) += pe(r);
        for (int s = 0; s < edofs; ++s) sys.K(gidx[r], gidx[s]) += ke(r, s);
      }
    }
  }
  if (!problem.load.neumann.empty()) sys.P += flatten(neumann_load(problem));

  for (std::size_t k = 0; k < n; ++k)
    if (problem.mask.mask.data[k] != 0.0) sys.free_index.push_back(int(k));
  sys.shift = problem.mask.shift;
  return sys;
}

NodeField dense_solve(const DenseSystem& sys) {
  const Eigen::Index nf = Eigen::Index(sys.free_index.size());
  const Eigen::VectorXd ubar = flatten(sys.shift);
  Eigen::MatrixXd kff(nf, nf);
  Eigen::VectorXd rhs(nf);
  const Eigen::VectorXd kubar = sys.K * ubar;
  for (Eigen::Index r = 0; r < nf; ++r) {
    const int gr = sys.free_index[r];
    rhs(r) = sys.P(gr) - kubar(gr);
    for (Eigen::Index s = 0; s < nf; ++s) kff(r, s) = sys.K(gr, sys.free_index[s]);
  }
  Eigen::LLT<Eigen::MatrixXd> llt(kff);
  if (llt.info() != Eigen::Success) throw SolverBreakdown("dense_solve: free block is not SPD");
  const Eigen::VectorXd af = llt.solve(rhs);
  Eigen::VectorXd a = ubar;
  for (Eigen::Index r = 0; r < nf; ++r) a(sys.free_index[r]) = af(r);
  return unflatten(a, sys.channels, sys.rows, sys.cols);
}

BaselineResult restarted_cg_baseline(const std::vector<const SystemOperator*>& ops,
                                     const std::vector<NodeField>& references, int n, int epochs,
                                     BaselineInit init, const NodeField* shift_mean, std::uint64_t seed) {
  if (ops.size() != references.size()) throw ShapeMismatch("baseline: one reference per sample");
  if (init == BaselineInit::ShiftMean && !shift_mean) throw InvalidArgument("baseline: shift mean required");
  BaselineResult res;
  std::vector<NodeField> state;
  state.reserve(ops.size());
  for (std::size_t s = 0; s < ops.size(); ++s) {
    NodeField a0 = ops[s]->zeros();
    if (init == BaselineInit::ShiftMean) {
      a0 = *shift_mean;
    } else {
      CounterRng rng(derive_seed(seed, s));
      for (double& v : a0.data) v = rng.normal();
    }
    state.push_back(apply_shift_bc(a0, ops[s]->mask()));
  }
  auto record = [&]() {
    double sum = 0.0, worst = 0.0;
    std::vector<double> energy(ops.size());
    for (std::size_t s = 0; s < ops.size(); ++s) {
      const double e = relative_l2(state[s], references[s], ops[s]->mask());
      sum += e;
      worst = std::max(worst, e);
      NodeField diff = state[s];
      axpy(-1.0, references[s], diff);
      energy[s] = std::sqrt(std::max(0.0, ops[s]->quadratic_form(diff)));
    }
    res.mean_rel_l2.push_back(ops.empty() ? 0.0 : sum / double(ops.size()));
    res.worst_rel_l2.push_back(worst);
    res.energy_error.push_back(std::move(energy));
  };
  record();
  for (int e = 0; e < epochs; ++e) {
    for (std::size_t s = 0; s < ops.size(); ++s) {
      const NodeField r = ops[s]->masked_residual(state[s]);
      try {
        axpy(1.0, cg_steps(r, state[s], *ops[s], n).delta, state[s]);
      } catch (const SolverBreakdown& err) {
        throw SolverBreakdown(err.what(), long(s));
      }
    }
    record();
  }
  return res;
}

void write_report_csv(const IterationReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  out << "step,alpha,beta,residual_norm\n" << std::setprecision(17);
  for (const auto& s : report.steps)
    out << s.step << ',' << s.alpha << ',' << s.beta << ',' << s.residual_norm << '\n';
}

}  // namespace vol
