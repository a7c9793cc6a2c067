#include "vol/harness/dataset.hpp"

#include <filesystem>
#include <numbers>

#include "vol/errors.hpp"
#include "vol/harness/array_file.hpp"
#include "vol/harness/random.hpp"
#include "vol/solvers.hpp"

namespace vol {

namespace fs = std::filesystem;

double FiberConfig::angle_min() const { return angle_min_deg * (std::numbers::pi / 180.0); }
double FiberConfig::angle_max() const { return angle_max_deg * (std::numbers::pi / 180.0); }

void DatasetSpec::validate() const {
  if (resolution < 3) throw InvalidArgument("dataset resolution must be >= 3 nodes per side");
  if (n_train < 0 || n_test < 0) throw InvalidArgument("sample counts must be >= 0");
  if (n_shift < 2) throw InvalidArgument("shift set needs at least 2 labels");
  if (!(solver_tol > 0.0)) throw InvalidArgument("solver tolerance must be positive");
  heat_grf.validate();
  darcy.validate();
  problem_cfg.lamina.validate();
  if (fiber.bspline_n < 4) throw InvalidArgument("B-spline control grid needs n >= 4");
  if (!(fiber.angle_min_deg <= fiber.angle_max_deg)) throw InvalidArgument("fiber angle range is empty");
  if (fiber.angle_min_deg < -90.0 || fiber.angle_max_deg > 90.0)
    throw InvalidArgument("fiber angles must lie in [-90, 90] degrees");
}

ConfigMap DatasetSpec::to_config() const {
  ConfigMap c;
  auto num = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  c.set("problem", to_string(problem));
  c.set("resolution", std::to_string(resolution));
  c.set("n_train", std::to_string(n_train));
  c.set("n_test", std::to_string(n_test));
  c.set("n_shift", std::to_string(n_shift));
  c.set("label_train", label_train ? "true" : "false");
  c.set("seed", std::to_string(seed));
  c.set("solver_tol", num(solver_tol));
  c.set("gauss_order", std::to_string(gauss_order));
  c.set("heat.conductivity", num(problem_cfg.heat_conductivity));
  c.set("heat.grf.length_scale", num(heat_grf.length_scale));
  c.set("heat.grf.variance", num(heat_grf.variance));
  c.set("heat.grf.mean", num(heat_grf.mean));
  c.set("darcy.source", num(problem_cfg.darcy_source));
  c.set("darcy.grf.length_scale", num(darcy.grf.length_scale));
  c.set("darcy.grf.variance", num(darcy.grf.variance));
  c.set("darcy.high", num(darcy.high));
  c.set("darcy.low", num(darcy.low));
  c.set("domain_size", num(problem_cfg.domain_size));
  c.set("plate_size", num(problem_cfg.plate_size));
  c.set("lamina.E1", num(problem_cfg.lamina.E1));
  c.set("lamina.E2", num(problem_cfg.lamina.E2));
  c.set("lamina.G12", num(problem_cfg.lamina.G12));
  c.set("lamina.nu12", num(problem_cfg.lamina.nu12));
  c.set("lamina.thickness", num(problem_cfg.lamina.thickness));
  c.set("traction_x", num(problem_cfg.traction[0]));
  c.set("traction_y", num(problem_cfg.traction[1]));
  c.set("fiber.angle_min_deg", num(fiber.angle_min_deg));
  c.set("fiber.angle_max_deg", num(fiber.angle_max_deg));
  c.set("fiber.bspline_n", std::to_string(fiber.bspline_n));
  return c;
}

DatasetSpec DatasetSpec::from_config(const ConfigMap& c) {
  DatasetSpec s;
  s.problem = problem_from_string(c.get_string("problem", to_string(s.problem)));
  s.resolution = c.get_int("resolution", s.resolution);
  s.n_train = c.get_int("n_train", s.n_train);
  s.n_test = c.get_int("n_test", s.n_test);
  s.n_shift = c.get_int("n_shift", s.n_shift);
  s.label_train = c.get_bool("label_train", s.label_train);
  s.seed = c.get_u64("seed", s.seed);
  s.solver_tol = c.get_double("solver_tol", s.solver_tol);
  s.gauss_order = c.get_int("gauss_order", s.gauss_order);
  auto& p = s.problem_cfg;
  p.heat_conductivity = c.get_double("heat.conductivity", p.heat_conductivity);
  s.heat_grf.length_scale = c.get_double("heat.grf.length_scale", s.heat_grf.length_scale);
  s.heat_grf.variance = c.get_double("heat.grf.variance", s.heat_grf.variance);
  s.heat_grf.mean = c.get_double("heat.grf.mean", s.heat_grf.mean);
  p.darcy_source = c.get_double("darcy.source", p.darcy_source);
  s.darcy.grf.length_scale = c.get_double("darcy.grf.length_scale", s.darcy.grf.length_scale);
  s.darcy.grf.variance = c.get_double("darcy.grf.variance", s.darcy.grf.variance);
  s.darcy.high = c.get_double("darcy.high", s.darcy.high);
  s.darcy.low = c.get_double("darcy.low", s.darcy.low);
  p.domain_size = c.get_double("domain_size", p.domain_size);
  p.plate_size = c.get_double("plate_size", p.plate_size);
  p.lamina.E1 = c.get_double("lamina.E1", p.lamina.E1);
  p.lamina.E2 = c.get_double("lamina.E2", p.lamina.E2);
  p.lamina.G12 = c.get_double("lamina.G12", p.lamina.G12);
  p.lamina.nu12 = c.get_double("lamina.nu12", p.lamina.nu12);
  p.lamina.thickness = c.get_double("lamina.thickness", p.lamina.thickness);
  p.traction[0] = c.get_double("traction_x", p.traction[0]);
  p.traction[1] = c.get_double("traction_y", p.traction[1]);
  s.fiber.angle_min_deg = c.get_double("fiber.angle_min_deg", s.fiber.angle_min_deg);
  s.fiber.angle_max_deg = c.get_double("fiber.angle_max_deg", s.fiber.angle_max_deg);
  s.fiber.bspline_n = c.get_int("fiber.bspline_n", s.fiber.bspline_n);
  s.validate();
  return s;
}

std::uint64_t sample_seed(std::uint64_t master, Split split, std::size_t index) {
  return derive_seed(derive_seed(master, std::uint64_t(split)), index);
}

ParameterField sample_input(const DatasetSpec& spec, const StructuredGrid& grid, std::uint64_t seed,
                            Sampling sampling) {
  const int order = spec.gauss_order;
  switch (spec.problem) {
    case ProblemKind::Heat: {
      GrfConfig g = spec.heat_grf;
      g.seed = seed;
      return sample_grf(grid, g, sampling, ParameterKind::Source, order);
    }
    case ProblemKind::Darcy: {
      DarcyConfig d = spec.darcy;
      d.grf.seed = seed;
      return sample_darcy_conductivity(grid, d, sampling, order);
    }
    case ProblemKind::ElasticityA: {
      CounterRng rng(seed);
      const double t0 = rng.uniform(spec.fiber.angle_min(), spec.fiber.angle_max());
      const double t1 = rng.uniform(spec.fiber.angle_min(), spec.fiber.angle_max());
      return sample_fiber_linear(t0, t1, grid, sampling, order);
    }
    case ProblemKind::ElasticityB: {
      CounterRng rng(seed);
      const int n = spec.fiber.bspline_n;
      std::vector<double> control(std::size_t(n) * n);
      for (double& c : control) c = rng.uniform(spec.fiber.angle_min(), spec.fiber.angle_max());
      return sample_fiber_bspline(control, n, grid, sampling, order);
    }
  }
  throw InvalidArgument("unknown problem kind");
}

NodeField label_sample(const SystemOperator& op, double tol, long index) {
  const NodeField a0 = apply_shift_bc(op.zeros(), op.mask());
  SolveResult s = cg_solve(op, a0, tol);
  if (!s.report.converged)
    throw SolverBreakdown("label solve did not reach tolerance " + std::to_string(tol), index);
  return std::move(s.solution);
}

namespace {

DataSplit generate_split(const DatasetSpec& spec, const std::shared_ptr<const Discretization>& disc, Split which,
                         int n, bool labeled) {
  DataSplit out;
  for (int i = 0; i < n; ++i) {
    const std::uint64_t seed = sample_seed(spec.seed, which, std::size_t(i));
    out.gauss.push_back(sample_input(spec, disc->grid, seed, Sampling::GaussPoints));
    out.nodes.push_back(sample_input(spec, disc->grid, seed, Sampling::Nodes));
    if (labeled) {
      const SystemOperator op(problem_factory(spec.problem, disc, out.gauss.back(), spec.problem_cfg));
      out.labels.push_back(label_sample(op, spec.solver_tol, i));
    }
  }
  return out;
}

void save_split(const DataSplit& s, const fs::path& dir) {
  fs::create_directories(dir);
  auto values = [](const std::vector<ParameterField>& v) {
    std::vector<Field3> f;
    for (const auto& p : v) f.push_back(p.values);
    return f;
  };
  write_array_file((dir / "inputs_gauss.volf").string(), stack_fields(values(s.gauss)));
  write_array_file((dir / "inputs_node.volf").string(), stack_fields(values(s.nodes)));
  if (s.labeled()) {
    std::vector<Field3> l(s.labels.begin(), s.labels.end());
    write_array_file((dir / "labels.volf").string(), stack_fields(l));
  }
}

DataSplit load_split(const fs::path& dir, ParameterKind kind, std::size_t expected) {
  DataSplit s;
  const auto gauss = unstack_fields(read_array_file((dir / "inputs_gauss.volf").string()));
  const auto nodes = unstack_fields(read_array_file((dir / "inputs_node.volf").string()));
  if (gauss.size() != expected || nodes.size() != expected)
    throw FormatError(dir.string() + ": sample count does not match metadata");
  for (const auto& g : gauss) s.gauss.push_back({kind, Sampling::GaussPoints, g});
  for (const auto& n : nodes) s.nodes.push_back({kind, Sampling::Nodes, n});
  if (fs::exists(dir / "labels.volf")) {
    for (auto& l : unstack_fields(read_array_file((dir / "labels.volf").string()))) {
      NodeField nf(l.channels, l.rows, l.cols);
      nf.data = std::move(l.data);
      s.labels.push_back(std::move(nf));
    }
    if (s.labels.size() != expected) throw FormatError(dir.string() + ": label count does not match inputs");
  }
  return s;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  ds.disc = make_discretization(default_grid(spec.problem, spec.resolution, spec.problem_cfg),
                                physics_of(spec.problem), spec.gauss_order);
  ds.train = generate_split(spec, ds.disc, Split::Train, spec.n_train, spec.label_train);
  ds.shift = generate_split(spec, ds.disc, Split::Shift, spec.n_shift, true);
  ds.test = generate_split(spec, ds.disc, Split::Test, spec.n_test, true);
  return ds;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root);
  ConfigMap meta = ds.spec.to_config();
  meta.set("format", "volf-dataset-1");
  meta.set("provenance", "artifact-default");
  meta.set("labeler", "cg_solve");
  meta.set("seed_derivation", "derive_seed(derive_seed(seed, split), index), split train=1 shift=2 test=3");
  meta.save((root / "metadata").string());
  save_split(ds.train, root / "train");
  save_split(ds.shift, root / "shift");
  save_split(ds.test, root / "test");
}

Dataset load_dataset(const std::string& dir) {
  const fs::path root(dir);
  Dataset ds;
  ds.spec = DatasetSpec::from_config(ConfigMap::load((root / "metadata").string()));
  const auto& spec = ds.spec;
  ds.disc = make_discretization(default_grid(spec.problem, spec.resolution, spec.problem_cfg),
                                physics_of(spec.problem), spec.gauss_order);
  const ParameterKind kind = parameter_of(spec.problem);
  ds.train = load_split(root / "train", kind, std::size_t(spec.n_train));
  ds.shift = load_split(root / "shift", kind, std::size_t(spec.n_shift));
  ds.test = load_split(root / "test", kind, std::size_t(spec.n_test));
  if (!ds.shift.labeled() || !ds.test.labeled()) throw FormatError(dir + ": shift and test sets must be labeled");
  return ds;
}

std::vector<TrainSample> make_samples(const Dataset& ds, const DataSplit& split, bool with_labels) {
  if (with_labels && !split.labeled()) throw InvalidArgument("split has no labels");
  std::vector<TrainSample> out;
  out.reserve(split.size());
  for (std::size_t i = 0; i < split.size(); ++i) {
    TrainSample s;
    s.input = split.gauss[i].values;
    s.op = std::make_shared<const SystemOperator>(
        problem_factory(ds.spec.problem, ds.disc, split.gauss[i], ds.spec.problem_cfg));
    if (with_labels) s.label = split.labels[i];
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace vol
