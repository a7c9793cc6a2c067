#include "vol/model.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <fstream>
#include <optional>
#include <sstream>

#include "vol/errors.hpp"
#include "vol/harness/array_file.hpp"
#include "vol/harness/random.hpp"

namespace vol {

std::string to_string(Activation a) {
  switch (a) {
    case Activation::Gelu: return "gelu";
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
  }
  return "?";
}

Activation activation_from_string(const std::string& s) {
  if (s == "gelu") return Activation::Gelu;
  if (s == "relu") return Activation::Relu;
  if (s == "tanh") return Activation::Tanh;
  throw InvalidArgument("unknown activation '" + s + "'");
}

void ModelConfig::validate() const {
  if (in_channels < 1 || hidden_channels < 1 || out_channels < 1)
    throw InvalidArgument("model channel counts must be >= 1");
  if (n_layers < 0) throw InvalidArgument("model layer count must be >= 0");
  if (kernel_extent < 1 || kernel_extent % 2 == 0) throw InvalidArgument("kernel extent must be odd and >= 1");
  if (spectral_modes < 0) throw InvalidArgument("spectral mode count must be >= 0");
  if (!(input_scale != 0.0) || !std::isfinite(input_scale) || !std::isfinite(input_offset))
    throw InvalidArgument("input standardization must be finite with nonzero scale");
}

std::vector<ParamSlice> parameter_layout(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t H = cfg.hidden_channels, k = cfg.kernel_extent;
  std::vector<ParamSlice> s;
  std::size_t off = 0;
  auto add = [&](std::string name, std::size_t n) {
    s.push_back({std::move(name), off, n});
    off += n;
  };
  if (cfg.use_alignment) {
    add("align.weight", H * cfg.in_channels * 4);
    add("align.bias", H);
  }
  add("lift.weight", H * (cfg.use_alignment ? H : std::size_t(cfg.in_channels)));
  add("lift.bias", H);
  for (int l = 0; l < cfg.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l);
    add(p + ".conv", H * H * k * k);
    if (cfg.spectral_modes > 0) add(p + ".spectral", spectral_weight_count(cfg));
    add(p + ".skip", H * H);
    add(p + ".bias", H);
  }
  add("proj.weight", std::size_t(cfg.out_channels) * H);
  add("proj.bias", cfg.out_channels);
  return s;
}

std::size_t spectral_weight_count(const ModelConfig& cfg) {
  const std::size_t H = cfg.hidden_channels, m = std::size_t(std::max(0, cfg.spectral_modes));
  return H * H * (2 * m) * m * 2;
}

std::size_t parameter_count(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t H = cfg.hidden_channels, in = cfg.in_channels, out = cfg.out_channels;
  const std::size_t k = cfg.kernel_extent;
  std::size_t n = 0;
  if (cfg.use_alignment) n += 4 * in * H + H;
  n += (cfg.use_alignment ? H : in) * H + H;
  n += std::size_t(cfg.n_layers) * (H * H * k * k + H * H + H + spectral_weight_count(cfg));
  n += H * out + out;
  return n;
}

const ParamSlice& ModelParams::slice(const std::string& name) const {
  for (const auto& s : slices)
    if (s.name == name) return s;
  throw InvalidArgument("no parameter slice named '" + name + "'");
}

ModelParams model_init(const ModelConfig& cfg) {
  ModelParams p;
  p.config = cfg;
  p.slices = parameter_layout(cfg);
  p.values.assign(parameter_count(cfg), 0.0);
  CounterRng rng(cfg.seed);
  const double H = cfg.hidden_channels, k = cfg.kernel_extent;
  for (const auto& s : p.slices) {
    double fan_in = 0.0;
    if (s.name == "align.weight") fan_in = 4.0 * cfg.in_channels;
    else if (s.name == "lift.weight") fan_in = cfg.use_alignment ? H : double(cfg.in_channels);
    else if (s.name.ends_with(".conv")) fan_in = H * k * k;
    else if (s.name.ends_with(".skip") || s.name.ends_with(".spectral") || s.name == "proj.weight") fan_in = H;
    if (fan_in == 0.0) continue;  // biases
    const double sc = 1.0 / std::sqrt(fan_in);
    for (std::size_t i = 0; i < s.size; ++i) p.values[s.offset + i] = sc * rng.normal();
  }
  return p;
}

namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

double act(Activation a, double x) {
  switch (a) {
    case Activation::Gelu: return 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::Tanh: return std::tanh(x);
  }
  return x;
}

double act_grad(Activation a, double x) {
  switch (a) {
    case Activation::Gelu: {
      const double cdf = 0.5 * (1.0 + std::erf(x * kInvSqrt2));
      const double pdf = std::exp(-0.5 * x * x) * kInvSqrt2Pi;
      return cdf + x * pdf;
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
  }
  return 1.0;
}

// out[o] = b[o] + sum_i w[o][i] in[i]   (1x1 convolution)
void pointwise(const double* w, const double* b, const Field3& in, int out_ch, Field3& out) {
  const std::size_t n = in.plane();
  for (int o = 0; o < out_ch; ++o) {
    double* dst = out.data.data() + o * n;
    std::fill(dst, dst + n, b ? b[o] : 0.0);
    for (int i = 0; i < in.channels; ++i) {
      const double wi = w[std::size_t(o) * in.channels + i];
      const double* src = in.data.data() + i * n;
      for (std::size_t p = 0; p < n; ++p) dst[p] += wi * src[p];
    }
  }
}

// gw[o][i] += sum g[o] in[i]; gb[o] += sum g[o]; gin[i] += sum_o w[o][i] g[o]
void pointwise_backward(const double* w, const Field3& in, const Field3& g, double* gw, double* gb,
                        Field3* gin) {
  const std::size_t n = in.plane();
  for (int o = 0; o < g.channels; ++o) {
    const double* go = g.data.data() + o * n;
    if (gb) {
      double s = 0.0;
      for (std::size_t p = 0; p < n; ++p) s += go[p];
      gb[o] += s;
    }
    for (int i = 0; i < in.channels; ++i) {
      const double* src = in.data.data() + i * n;
      double s = 0.0;
      for (std::size_t p = 0; p < n; ++p) s += go[p] * src[p];
      gw[std::size_t(o) * in.channels + i] += s;
      if (gin) {
        const double wi = w[std::size_t(o) * in.channels + i];
        double* dst = gin->data.data() + i * n;
        for (std::size_t p = 0; p < n; ++p) dst[p] += wi * go[p];
      }
    }
  }
}

// Same-padded k x k cross-correlation: out[o](j,i) += w[o][c][ky][kx] in[c](j+ky-r, i+kx-r).
void conv_same_accumulate(const double* w, int k, const Field3& in, Field3& out) {
  const int r = k / 2, rows = in.rows, cols = in.cols;
  for (int o = 0; o < out.channels; ++o)
    for (int c = 0; c < in.channels; ++c)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const double wv = w[((std::size_t(o) * in.channels + c) * k + ky) * k + kx];
          const int dy = ky - r, dx = kx - r;
          const int j0 = std::max(0, -dy), j1 = std::min(rows, rows - dy);
          const int i0 = std::max(0, -dx), i1 = std::min(cols, cols - dx);
          for (int j = j0; j < j1; ++j) {
            double* dst = out.ptr(o, j, 0);
            const double* src = in.ptr(c, j + dy, 0) + dx;
            for (int i = i0; i < i1; ++i) dst[i] += wv * src[i];
          }
        }
}

void conv_same_backward(const double* w, int k, const Field3& in, const Field3& g, double* gw, Field3& gin) {
  const int r = k / 2, rows = in.rows, cols = in.cols;
  for (int o = 0; o < g.channels; ++o)
    for (int c = 0; c < in.channels; ++c)
      for (int ky = 0; ky < k; ++ky)
        for (int kx = 0; kx < k; ++kx) {
          const std::size_t widx = ((std::size_t(o) * in.channels + c) * k + ky) * k + kx;
          const double wv = w[widx];
          const int dy = ky - r, dx = kx - r;
          const int j0 = std::max(0, -dy), j1 = std::min(rows, rows - dy);
          const int i0 = std::max(0, -dx), i1 = std::min(cols, cols - dx);
          double s = 0.0;
          for (int j = j0; j < j1; ++j) {
            const double* go = g.ptr(o, j, 0);
            const double* src = in.ptr(c, j + dy, 0) + dx;
            double* gi = gin.ptr(c, j + dy, 0) + dx;
            for (int i = i0; i < i1; ++i) {
              s += go[i] * src[i];
              gi[i] += wv * go[i];
            }
          }
          gw[widx] += s;
        }
}

// Stride-1 transposed 2x2 convolution from the element grid (rows, cols) to
// the node grid (rows+1, cols+1): out[o](j,i) = b[o] + sum w[o][c][dy][dx] in[c](j-dy, i-dx).
void align_forward(const double* w, const double* b, const Field3& in, int out_ch, Field3& out) {
  out = Field3(out_ch, in.rows + 1, in.cols + 1);
  for (int o = 0; o < out_ch; ++o) {
    std::fill(out.channel(o).begin(), out.channel(o).end(), b[o]);
    for (int c = 0; c < in.channels; ++c)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          const double wv = w[((std::size_t(o) * in.channels + c) * 2 + dy) * 2 + dx];
          for (int j = 0; j < in.rows; ++j) {
            const double* src = in.ptr(c, j, 0);
            double* dst = out.ptr(o, j + dy, dx);
            for (int i = 0; i < in.cols; ++i) dst[i] += wv * src[i];
          }
        }
  }
}

void align_backward(const Field3& in, const Field3& g, double* gw, double* gb) {
  for (int o = 0; o < g.channels; ++o) {
    double s = 0.0;
    for (double v : g.channel(o)) s += v;
    gb[o] += s;
    for (int c = 0; c < in.channels; ++c)
      for (int dy = 0; dy < 2; ++dy)
        for (int dx = 0; dx < 2; ++dx) {
          double acc = 0.0;
          for (int j = 0; j < in.rows; ++j) {
            const double* src = in.ptr(c, j, 0);
            const double* go = g.ptr(o, j + dy, dx);
            for (int i = 0; i < in.cols; ++i) acc += go[i] * src[i];
          }
          gw[((std::size_t(o) * in.channels + c) * 2 + dy) * 2 + dx] += acc;
        }
  }
}

using cplx = std::complex<double>;

// Truncated Fourier mixing on the node grid. Retained modes: kx in [0, m),
// ky in {0..m-1} u {-m..-1}; weights [o][c][r][kx][re, im] with r the ky row.
//   X_c(k) = 1/(N M) sum_{j,i} h_c(j,i) e^{-i theta_k(j,i)}
//   Y_o(k) = sum_c W_oc(k) X_c(k)
//   y_o(j,i) = sum_k c_k Re(Y_o(k) e^{+i theta_k(j,i)}),  c_k = 1 (kx = 0) or 2
struct SpectralPlan {
  int m, rows, cols;
  std::vector<cplx> ex;  // [kx][i] = e^{-2 pi i kx i / N}
  std::vector<cplx> ey;  // [r][j]  = e^{-2 pi i ky j / M}

  SpectralPlan(int modes, int rows_, int cols_) : m(modes), rows(rows_), cols(cols_) {
    if (rows < 2 * m || cols < 2 * m)
      throw ShapeMismatch("grid " + std::to_string(rows) + "x" + std::to_string(cols) + " too small for " +
                          std::to_string(m) + " spectral modes");
    constexpr double two_pi = 6.283185307179586476925;
    ex.resize(std::size_t(m) * cols);
    for (int k = 0; k < m; ++k)
      for (int i = 0; i < cols; ++i) ex[std::size_t(k) * cols + i] = std::polar(1.0, -two_pi * k * i / cols);
    ey.resize(std::size_t(2 * m) * rows);
    for (int r = 0; r < 2 * m; ++r) {
      const int ky = r < m ? r : r - 2 * m;
      for (int j = 0; j < rows; ++j) ey[std::size_t(r) * rows + j] = std::polar(1.0, -two_pi * ky * j / rows);
    }
  }
  std::size_t n_modes() const { return std::size_t(2 * m) * m; }

  // Real field [C][M][N] -> coefficients [C][2m][m], scaled by 1/(NM).
  std::vector<cplx> analyze(const Field3& h) const {
    const int C = h.channels;
    std::vector<cplx> a(std::size_t(rows) * m), out(std::size_t(C) * n_modes(), 0.0);
    const double s = 1.0 / (double(rows) * cols);
    for (int c = 0; c < C; ++c) {
      for (int j = 0; j < rows; ++j) {
        const double* row = h.ptr(c, j, 0);
        for (int k = 0; k < m; ++k) {
          const cplx* e = &ex[std::size_t(k) * cols];
          cplx acc = 0.0;
          for (int i = 0; i < cols; ++i) acc += row[i] * e[i];
          a[std::size_t(j) * m + k] = acc;
        }
      }
      cplx* o = &out[std::size_t(c) * n_modes()];
      for (int r = 0; r < 2 * m; ++r) {
        const cplx* e = &ey[std::size_t(r) * rows];
        for (int k = 0; k < m; ++k) {
          cplx acc = 0.0;
          for (int j = 0; j < rows; ++j) acc += a[std::size_t(j) * m + k] * e[j];
          o[std::size_t(r) * m + k] = s * acc;
        }
      }
    }
    return out;
  }

  // y_c(j,i) += scale * sum_k w_k Re(Y_c(k) e^{+i theta}), w_k = c_k if weighted else 1.
  void synthesize(const std::vector<cplx>& Y, int C, bool weighted, double scale, Field3& y) const {
    std::vector<cplx> b(std::size_t(rows) * m);
    for (int c = 0; c < C; ++c) {
      const cplx* yc = &Y[std::size_t(c) * n_modes()];
      for (int j = 0; j < rows; ++j)
        for (int k = 0; k < m; ++k) {
          cplx acc = 0.0;
          for (int r = 0; r < 2 * m; ++r) acc += yc[std::size_t(r) * m + k] * std::conj(ey[std::size_t(r) * rows + j]);
          b[std::size_t(j) * m + k] = acc * (scale * (weighted && k > 0 ? 2.0 : 1.0));
        }
      for (int j = 0; j < rows; ++j) {
        double* row = y.ptr(c, j, 0);
        for (int k = 0; k < m; ++k) {
          const cplx bk = b[std::size_t(j) * m + k];
          const cplx* e = &ex[std::size_t(k) * cols];
          for (int i = 0; i < cols; ++i) row[i] += bk.real() * e[i].real() + bk.imag() * e[i].imag();
        }
      }
    }
  }
};

// pre += spectral(h)
void spectral_forward(const double* w, const SpectralPlan& plan, const Field3& h, Field3& pre) {
  const int H = h.channels;
  const std::size_t K = plan.n_modes();
  const auto X = plan.analyze(h);
  std::vector<cplx> Y(std::size_t(H) * K, 0.0);
  for (int o = 0; o < H; ++o)
    for (int c = 0; c < H; ++c) {
      const double* wp = w + (std::size_t(o) * H + c) * K * 2;
      const cplx* xc = &X[std::size_t(c) * K];
      cplx* yo = &Y[std::size_t(o) * K];
      for (std::size_t k = 0; k < K; ++k) yo[k] += cplx(wp[2 * k], wp[2 * k + 1]) * xc[k];
    }
  plan.synthesize(Y, H, true, 1.0, pre);
}

void spectral_backward(const double* w, const SpectralPlan& plan, const Field3& h, const Field3& g, double* gw,
                       Field3& gin) {
  const int H = h.channels;
  const std::size_t K = plan.n_modes();
  const double nm = double(plan.rows) * plan.cols;
  // gY = c_k * sum gy e^{-i theta}; analyze() carries 1/(NM), undo it.
  auto gY = plan.analyze(g);
  for (int o = 0; o < H; ++o)
    for (int r = 0; r < 2 * plan.m; ++r)
      for (int k = 0; k < plan.m; ++k) gY[std::size_t(o) * K + std::size_t(r) * plan.m + k] *= nm * (k > 0 ? 2.0 : 1.0);
  const auto X = plan.analyze(h);
  std::vector<cplx> gX(std::size_t(H) * K, 0.0);
  for (int o = 0; o < H; ++o)
    for (int c = 0; c < H; ++c) {
      const std::size_t base = (std::size_t(o) * H + c) * K * 2;
      const cplx* xc = &X[std::size_t(c) * K];
      const cplx* go = &gY[std::size_t(o) * K];
      cplx* gx = &gX[std::size_t(c) * K];
      for (std::size_t k = 0; k < K; ++k) {
        const cplx gwk = go[k] * std::conj(xc[k]);
        gw[base + 2 * k] += gwk.real();
        gw[base + 2 * k + 1] += gwk.imag();
        gx[k] += std::conj(cplx(w[base + 2 * k], w[base + 2 * k + 1])) * go[k];
      }
    }
  // h -> X has adjoint gX -> (1/NM) sum_k Re(gX e^{+i theta}).
  plan.synthesize(gX, H, false, 1.0 / nm, gin);
}

// Tape buffer order: [0] standardized input, [1] aligned (alignment only),
// then h_0, (pre_k, h_{k+1}) per layer.
struct TapeLayout {
  int first_hidden;
  int pre(int k) const { return first_hidden + 1 + 2 * k; }
  int hidden(int k) const { return k == 0 ? first_hidden : first_hidden + 2 * k; }
};

TapeLayout tape_layout(const ModelConfig& cfg) { return {cfg.use_alignment ? 2 : 1}; }

}  // namespace

ForwardResult model_forward(const ModelParams& params, const Field3& input, const MaskSpec& mask,
                            const ShiftStats& shift) {
  const ModelConfig& cfg = params.config;
  if (params.values.size() != parameter_count(cfg)) throw ShapeMismatch("parameter vector does not match config");
  if (input.channels != cfg.in_channels)
    throw ShapeMismatch("model expects " + std::to_string(cfg.in_channels) + " input channels, got " +
                        std::to_string(input.channels));
  const int rows = mask.mask.rows, cols = mask.mask.cols;
  const int in_rows = cfg.use_alignment ? rows - 1 : rows, in_cols = cfg.use_alignment ? cols - 1 : cols;
  if (input.rows != in_rows || input.cols != in_cols)
    throw ShapeMismatch("input resolution " + std::to_string(input.rows) + "x" + std::to_string(input.cols) +
                        " does not match expected " + std::to_string(in_rows) + "x" + std::to_string(in_cols));
  if (mask.mask.channels != cfg.out_channels) throw ShapeMismatch("mask channels do not match model output");
  require_same_shape(mask.mask, shift.mean, "shift mean");
  require_same_shape(mask.mask, shift.std, "shift std");

  const int H = cfg.hidden_channels;
  ForwardResult res;
  auto& buf = res.tape.buffers;
  Field3 x = input;
  for (double& v : x.data) v = (v - cfg.input_offset) * cfg.input_scale;
  buf.push_back(std::move(x));
  if (cfg.use_alignment) {
    Field3 z;
    align_forward(params.data("align.weight"), params.data("align.bias"), buf[0], H, z);
    buf.push_back(std::move(z));
  }
  {
    Field3 h0(H, rows, cols);
    pointwise(params.data("lift.weight"), params.data("lift.bias"), buf.back(), H, h0);
    buf.push_back(std::move(h0));
  }
  std::optional<SpectralPlan> plan;
  if (cfg.spectral_modes > 0 && cfg.n_layers > 0) plan.emplace(cfg.spectral_modes, rows, cols);
  for (int k = 0; k < cfg.n_layers; ++k) {
    const std::string p = "layer" + std::to_string(k);
    const Field3& h = buf.back();
    Field3 pre(H, rows, cols);
    pointwise(params.data(p + ".skip"), params.data(p + ".bias"), h, H, pre);
    conv_same_accumulate(params.data(p + ".conv"), cfg.kernel_extent, h, pre);
    if (plan) spectral_forward(params.data(p + ".spectral"), *plan, h, pre);
    Field3 next = pre;
    for (double& v : next.data) v = act(cfg.activation, v);
    buf.push_back(std::move(pre));
    buf.push_back(std::move(next));
  }
  NodeField y(cfg.out_channels, rows, cols);
  pointwise(params.data("proj.weight"), params.data("proj.bias"), buf.back(), cfg.out_channels, y);
  for (std::size_t i = 0; i < y.size(); ++i)
    y.data[i] = mask.mask.data[i] * (y.data[i] * shift.std.data[i] + shift.mean.data[i]) + mask.shift.data[i];
  res.output = std::move(y);
  res.tape.mask = mask.mask;
  res.tape.std = shift.std;
  res.tape.out_channels = cfg.out_channels;
  return res;
}

std::vector<double> model_vjp(const ModelParams& params, const Tape& tape, const NodeField& cotangent) {
  const ModelConfig& cfg = params.config;
  const TapeLayout lay = tape_layout(cfg);
  const std::size_t expected = std::size_t(lay.first_hidden) + 1 + 2 * std::size_t(cfg.n_layers);
  if (tape.buffers.size() != expected || tape.out_channels != cfg.out_channels)
    throw ShapeMismatch("tape does not come from a forward pass of this model");
  require_same_shape(cotangent, tape.mask, "model_vjp cotangent");

  std::vector<double> grad(params.values.size(), 0.0);
  auto g = [&](const std::string& name) { return grad.data() + params.slice(name).offset; };

  // Shift and mask stages: d a / d y = mask * std.
  Field3 gy = cotangent;
  for (std::size_t i = 0; i < gy.size(); ++i) gy.data[i] *= tape.mask.data[i] * tape.std.data[i];

  const int H = cfg.hidden_channels;
  const Field3& h_last = tape.buffers[lay.hidden(cfg.n_layers)];
  Field3 gh(H, h_last.rows, h_last.cols);
  pointwise_backward(params.data("proj.weight"), h_last, gy, g("proj.weight"), g("proj.bias"), &gh);

  std::optional<SpectralPlan> plan;
  if (cfg.spectral_modes > 0 && cfg.n_layers > 0) plan.emplace(cfg.spectral_modes, h_last.rows, h_last.cols);
  for (int k = cfg.n_layers - 1; k >= 0; --k) {
    const std::string p = "layer" + std::to_string(k);
    const Field3& pre = tape.buffers[lay.pre(k)];
    const Field3& h = tape.buffers[lay.hidden(k)];
    Field3 gpre = gh;
    for (std::size_t i = 0; i < gpre.size(); ++i) gpre.data[i] *= act_grad(cfg.activation, pre.data[i]);
    Field3 gin(H, h.rows, h.cols);
    pointwise_backward(params.data(p + ".skip"), h, gpre, g(p + ".skip"), g(p + ".bias"), &gin);
    conv_same_backward(params.data(p + ".conv"), cfg.kernel_extent, h, gpre, g(p + ".conv"), gin);
    if (plan) spectral_backward(params.data(p + ".spectral"), *plan, h, gpre, g(p + ".spectral"), gin);
    gh = std::move(gin);
  }

  const Field3& lift_in = tape.buffers[lay.first_hidden - 1];
  if (cfg.use_alignment) {
    Field3 gz(H, lift_in.rows, lift_in.cols);
    pointwise_backward(params.data("lift.weight"), lift_in, gh, g("lift.weight"), g("lift.bias"), &gz);
    align_backward(tape.buffers[0], gz, g("align.weight"), g("align.bias"));
  } else {
    pointwise_backward(params.data("lift.weight"), lift_in, gh, g("lift.weight"), g("lift.bias"), nullptr);
  }
  return grad;
}

ForwardResult NodalFieldModel::forward(const Field3&, const MaskSpec& mask, const ShiftStats& shift) const {
  if (mask.mask.channels != channels_ || mask.mask.rows != rows_ || mask.mask.cols != cols_)
    throw ShapeMismatch("nodal field model shape does not match mask");
  ForwardResult res;
  res.output = NodeField(channels_, rows_, cols_);
  for (std::size_t i = 0; i < values_.size(); ++i)
    res.output.data[i] =
        mask.mask.data[i] * (values_[i] * shift.std.data[i] + shift.mean.data[i]) + mask.shift.data[i];
  res.tape.mask = mask.mask;
  res.tape.std = shift.std;
  res.tape.out_channels = channels_;
  return res;
}

std::vector<double> NodalFieldModel::vjp(const Tape& tape, const NodeField& cotangent) const {
  require_same_shape(cotangent, tape.mask, "nodal field vjp");
  std::vector<double> g(values_.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = cotangent.data[i] * tape.mask.data[i] * tape.std.data[i];
  return g;
}

namespace {

constexpr const char* kCheckpointMagic = "VOLCKPT";

}  // namespace

void save_checkpoint(const ModelParams& params, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  const ModelConfig& c = params.config;
  std::ostringstream h;
  h.precision(17);
  h << kCheckpointMagic << "\n"
    << "model_format_version: 1\n"
    << "in_channels: " << c.in_channels << "\n"
    << "hidden_channels: " << c.hidden_channels << "\n"
    << "out_channels: " << c.out_channels << "\n"
    << "n_layers: " << c.n_layers << "\n"
    << "kernel_extent: " << c.kernel_extent << "\n"
    << "spectral_modes: " << c.spectral_modes << "\n"
    << "use_alignment: " << (c.use_alignment ? "true" : "false") << "\n"
    << "activation: " << to_string(c.activation) << "\n"
    << "seed: " << c.seed << "\n"
    << "input_offset: " << c.input_offset << "\n"
    << "input_scale: " << c.input_scale << "\n";
  for (const auto& s : params.slices) h << "slice: " << s.name << " " << s.offset << " " << s.size << "\n";
  h << "end_header\n";
  out << h.str();
  write_array(out, ArrayData{{params.values.size()}, params.values});
}

ModelParams load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot read checkpoint " + path);
  std::string line;
  std::getline(in, line);
  if (line != kCheckpointMagic) throw FormatError(path + ": not a model checkpoint");
  ModelConfig c;
  std::vector<ParamSlice> slices;
  bool version_ok = false;
  while (std::getline(in, line) && line != "end_header") {
    const auto colon = line.find(": ");
    if (colon == std::string::npos) throw FormatError(path + ": malformed header line '" + line + "'");
    const std::string key = line.substr(0, colon), val = line.substr(colon + 2);
    if (key == "model_format_version") {
      if (val != "1") throw FormatError(path + ": unsupported model_format_version " + val);
      version_ok = true;
    } else if (key == "in_channels") c.in_channels = std::stoi(val);
    else if (key == "hidden_channels") c.hidden_channels = std::stoi(val);
    else if (key == "out_channels") c.out_channels = std::stoi(val);
    else if (key == "n_layers") c.n_layers = std::stoi(val);
    else if (key == "kernel_extent") c.kernel_extent = std::stoi(val);
    else if (key == "spectral_modes") c.spectral_modes = std::stoi(val);
    else if (key == "use_alignment") c.use_alignment = val == "true";
    else if (key == "activation") c.activation = activation_from_string(val);
    else if (key == "seed") c.seed = std::stoull(val);
    else if (key == "input_offset") c.input_offset = std::stod(val);
    else if (key == "input_scale") c.input_scale = std::stod(val);
    else if (key == "slice") {
      std::istringstream ss(val);
      ParamSlice s;
      ss >> s.name >> s.offset >> s.size;
      slices.push_back(s);
    }
  }
  if (!version_ok) throw FormatError(path + ": missing model_format_version");
  ModelParams p;
  p.config = c;
  p.slices = parameter_layout(c);
  if (slices.size() != p.slices.size()) throw FormatError(path + ": slice table does not match config");
  for (std::size_t i = 0; i < slices.size(); ++i)
    if (slices[i].name != p.slices[i].name || slices[i].offset != p.slices[i].offset ||
        slices[i].size != p.slices[i].size)
      throw FormatError(path + ": slice '" + slices[i].name + "' does not match config");
  ArrayData a = read_array(in);
  if (a.values.size() != parameter_count(c)) throw FormatError(path + ": parameter count mismatch");
  p.values = std::move(a.values);
  return p;
}

}  // namespace vol
