#pragma once

// Benchmark datasets: unlabeled training inputs, a small labeled shift set,
// and a labeled test set. Labels come from a full CG solve.
//
// On disk:
//   <dir>/metadata                     key = value, every declared default
//   <dir>/{train,shift,test}/inputs_gauss.volf   (n, slots, ny, nx)
//   <dir>/{train,shift,test}/inputs_node.volf    (n, 1, ny+1, nx+1)
//   <dir>/{shift,test}/labels.volf               (n, channels, ny+1, nx+1)
//   train/labels.volf only when label_train is set.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vol/harness/config.hpp"
#include "vol/harness/random_fields.hpp"
#include "vol/physics.hpp"
#include "vol/training.hpp"

namespace vol {

// Fiber angles are given in degrees here and converted to radians when a
// field is sampled.
struct FiberConfig {
  double angle_min_deg = -90.0;
  double angle_max_deg = 90.0;
  int bspline_n = 4;

  double angle_min() const;  // radians
  double angle_max() const;
};

struct DatasetSpec {
  ProblemKind problem = ProblemKind::Heat;
  int resolution = 33;  // nodes per side
  int n_train = 64;
  int n_test = 16;
  int n_shift = 5;
  // Label the training split too (supervised baselines, train-error curves).
  bool label_train = false;
  std::uint64_t seed = 0;
  double solver_tol = 1e-10;
  int gauss_order = 2;
  ProblemConfig problem_cfg;
  GrfConfig heat_grf;
  DarcyConfig darcy;
  FiberConfig fiber;

  void validate() const;
  ConfigMap to_config() const;
  // Missing keys keep their defaults.
  static DatasetSpec from_config(const ConfigMap& c);
};

struct DataSplit {
  std::vector<ParameterField> gauss;
  std::vector<ParameterField> nodes;
  std::vector<NodeField> labels;  // empty for unlabeled splits

  std::size_t size() const { return gauss.size(); }
  bool labeled() const { return !labels.empty(); }
};

struct Dataset {
  DatasetSpec spec;
  std::shared_ptr<const Discretization> disc;
  DataSplit train, shift, test;
};

enum class Split { Train = 1, Shift = 2, Test = 3 };

std::uint64_t sample_seed(std::uint64_t master, Split split, std::size_t index);

// The problem parameter of one sample (conductivity, source or fiber angle).
ParameterField sample_input(const DatasetSpec& spec, const StructuredGrid& grid, std::uint64_t seed,
                            Sampling sampling);

// Full CG solve of one sample to spec.solver_tol; throws SolverBreakdown
// carrying `index` if the solve does not converge.
NodeField label_sample(const SystemOperator& op, double tol, long index);

Dataset generate_dataset(const DatasetSpec& spec);
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

// Builds one system per sample. Labels are attached only if requested.
std::vector<TrainSample> make_samples(const Dataset& ds, const DataSplit& split, bool with_labels);

}  // namespace vol
