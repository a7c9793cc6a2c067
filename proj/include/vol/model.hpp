#pragma once

// Field-to-field surrogate: optional alignment (element grid -> node grid by
// a 2x2 transposed convolution), 1x1 lifting, hidden blocks of
// act(conv_k(h) + W_skip h + b [+ spectral(h)]), 1x1 projection, then the distribution
// shift and the hard boundary-condition stage. Reverse mode is written out
// by hand; there is no autodiff dependency.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "vol/fields.hpp"

namespace vol {

enum class Activation { Gelu, Relu, Tanh };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct ModelConfig {
  int in_channels = 4;
  int hidden_channels = 32;
  int out_channels = 1;
  int n_layers = 4;
  int kernel_extent = 5;
  // Retained Fourier modes per axis in each hidden layer; 0 disables the
  // spectral path.
  int spectral_modes = 0;
  bool use_alignment = true;
  Activation activation = Activation::Gelu;
  std::uint64_t seed = 0;
  // Fixed input standardization x' = (x - input_offset) * input_scale.
  double input_offset = 0.0;
  double input_scale = 1.0;

  void validate() const;
};

// Closed-form parameter count:
//   alignment  4*in*H + H            (only with use_alignment)
//   lifting    L*H + H,  L = H with alignment, in without
//   per layer  H*H*k*k + H*H + H  (+ 4*m*m*H*H with m spectral modes)
//   projection H*out + out
std::size_t parameter_count(const ModelConfig& cfg);
std::size_t spectral_weight_count(const ModelConfig& cfg);

struct ParamSlice {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

struct ModelParams {
  ModelConfig config;
  std::vector<double> values;
  std::vector<ParamSlice> slices;

  const ParamSlice& slice(const std::string& name) const;
  double* data(const std::string& name) { return values.data() + slice(name).offset; }
  const double* data(const std::string& name) const { return values.data() + slice(name).offset; }
};

// Layout of the named slices for a config (values left empty).
std::vector<ParamSlice> parameter_layout(const ModelConfig& cfg);

// Deterministic from cfg.seed: weights N(0,1)/sqrt(fan_in), biases zero.
ModelParams model_init(const ModelConfig& cfg);

// Elementwise mean/std over the shift-set labels.
struct ShiftStats {
  NodeField mean;
  NodeField std;
};

// Activations kept for the reverse pass.
struct Tape {
  std::vector<Field3> buffers;
  NodeField mask;
  NodeField std;
  int out_channels = 0;
};

struct ForwardResult {
  NodeField output;
  Tape tape;
};

ForwardResult model_forward(const ModelParams& params, const Field3& input, const MaskSpec& mask,
                            const ShiftStats& shift);

// Gradient of <output, cotangent> with respect to every parameter.
std::vector<double> model_vjp(const ModelParams& params, const Tape& tape, const NodeField& cotangent);

// Common surface the trainer drives.
class OperatorModel {
 public:
  virtual ~OperatorModel() = default;
  virtual ForwardResult forward(const Field3& input, const MaskSpec& mask, const ShiftStats& shift) const = 0;
  virtual std::vector<double> vjp(const Tape& tape, const NodeField& cotangent) const = 0;
  virtual std::vector<double>& parameters() = 0;
  virtual const std::vector<double>& parameters() const = 0;
};

class ConvOperatorModel final : public OperatorModel {
 public:
  explicit ConvOperatorModel(ModelParams params) : params_(std::move(params)) {}
  explicit ConvOperatorModel(const ModelConfig& cfg) : params_(model_init(cfg)) {}

  ForwardResult forward(const Field3& input, const MaskSpec& mask, const ShiftStats& shift) const override {
    return model_forward(params_, input, mask, shift);
  }
  std::vector<double> vjp(const Tape& tape, const NodeField& cotangent) const override {
    return model_vjp(params_, tape, cotangent);
  }
  std::vector<double>& parameters() override { return params_.values; }
  const std::vector<double>& parameters() const override { return params_.values; }

  const ModelParams& params() const { return params_; }
  const ModelConfig& config() const { return params_.config; }

 private:
  ModelParams params_;
};

// Ignores its input: the parameters are the nodal field itself, passed
// through the same shift and boundary stages. Used to audit the training
// signal in isolation.
class NodalFieldModel final : public OperatorModel {
 public:
  NodalFieldModel(int channels, int rows, int cols) : values_(std::size_t(channels) * rows * cols, 0.0),
                                                      channels_(channels), rows_(rows), cols_(cols) {}

  ForwardResult forward(const Field3& input, const MaskSpec& mask, const ShiftStats& shift) const override;
  std::vector<double> vjp(const Tape& tape, const NodeField& cotangent) const override;
  std::vector<double>& parameters() override { return values_; }
  const std::vector<double>& parameters() const override { return values_; }

 private:
  std::vector<double> values_;
  int channels_, rows_, cols_;
};

// Checkpoint: text header (model_format_version, config echo, slice table)
// followed by one VOLF array holding all parameters.
void save_checkpoint(const ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace vol
