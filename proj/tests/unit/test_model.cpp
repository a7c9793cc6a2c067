#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "vol/errors.hpp"
#include "vol/harness/random.hpp"
#include "vol/model.hpp"

using namespace vol;

namespace {

ModelConfig small_config(int modes = 0) {
  ModelConfig c;
  c.in_channels = 4;
  c.hidden_channels = 6;
  c.out_channels = 2;
  c.n_layers = 2;
  c.kernel_extent = 3;
  c.spectral_modes = modes;
  c.seed = 3;
  return c;
}

Field3 random_input(int c, int ny, int nx, std::uint64_t seed) {
  CounterRng rng(seed);
  Field3 f(c, ny, nx);
  for (double& v : f.data) v = rng.normal();
  return f;
}

// Left column clamped to per-channel prescribed values.
MaskSpec left_clamp(int channels, int rows, int cols) {
  MaskSpec m{NodeField(channels, rows, cols, 1.0), NodeField(channels, rows, cols, 0.0)};
  for (int c = 0; c < channels; ++c)
    for (int j = 0; j < rows; ++j) {
      m.mask.at(c, j, 0) = 0.0;
      m.shift.at(c, j, 0) = 0.5 + c;
    }
  return m;
}

ShiftStats random_shift(int channels, int rows, int cols, std::uint64_t seed) {
  CounterRng rng(seed);
  ShiftStats s{NodeField(channels, rows, cols), NodeField(channels, rows, cols)};
  for (double& v : s.mean.data) v = rng.normal();
  for (double& v : s.std.data) v = 0.5 + rng.uniform();
  return s;
}

double max_rel_fd(const ModelParams& p, const Field3& input, const MaskSpec& mask, const ShiftStats& shift,
                  const NodeField& cot) {
  const auto fw = model_forward(p, input, mask, shift);
  const auto g = model_vjp(p, fw.tape, cot);
  const double h = 1e-6;
  double worst = 0.0;
  ModelParams q = p;
  for (std::size_t i = 0; i < p.values.size(); ++i) {
    q.values[i] = p.values[i] + h;
    const double fp = dot(model_forward(q, input, mask, shift).output, cot);
    q.values[i] = p.values[i] - h;
    const double fm = dot(model_forward(q, input, mask, shift).output, cot);
    q.values[i] = p.values[i];
    const double fd = (fp - fm) / (2 * h);
    worst = std::max(worst, std::abs(fd - g[i]) / std::max({std::abs(fd), std::abs(g[i]), 1e-6}));
  }
  return worst;
}

}  // namespace

TEST_CASE("parameter count closed form") {
  ModelConfig c;
  c.in_channels = 4;
  c.hidden_channels = 16;
  c.out_channels = 1;
  c.n_layers = 2;
  c.kernel_extent = 3;
  CHECK(parameter_count(c) == 5713);
  CHECK(model_init(c).values.size() == 5713);
  c.use_alignment = false;
  // lift 4*16+16, layers 2*(16*16*9+256+16), projection 17.
  CHECK(parameter_count(c) == 80 + 5152 + 17);
  c.use_alignment = true;
  c.spectral_modes = 3;
  CHECK(spectral_weight_count(c) == 4 * 9 * 16 * 16);
  CHECK(parameter_count(c) == 5713 + 2 * 4 * 9 * 16 * 16);
  CHECK(model_init(c).values.size() == parameter_count(c));

  std::size_t end = 0;
  for (const auto& s : parameter_layout(c)) {
    CHECK(s.offset == end);
    end += s.size;
  }
  CHECK(end == parameter_count(c));
}

TEST_CASE("config validation") {
  ModelConfig c = small_config();
  c.kernel_extent = 4;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = small_config();
  c.hidden_channels = 0;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
  c = small_config();
  c.spectral_modes = -1;
  CHECK_THROWS_AS(c.validate(), InvalidArgument);
}

TEST_CASE("initialization is deterministic in the seed") {
  const ModelParams a = model_init(small_config()), b = model_init(small_config());
  CHECK(a.values == b.values);
  ModelConfig c = small_config();
  c.seed = 4;
  CHECK(model_init(c).values != a.values);
  // Biases start at zero, weights do not.
  for (double v : std::vector<double>(a.data("proj.bias"), a.data("proj.bias") + 2)) CHECK(v == 0.0);
  CHECK(a.data("lift.weight")[0] != 0.0);
}

TEST_CASE("zero network returns the shift mean with hard boundary values") {
  ModelParams p = model_init(small_config());
  std::fill(p.values.begin(), p.values.end(), 0.0);
  const MaskSpec mask = left_clamp(2, 6, 7);
  const ShiftStats shift = random_shift(2, 6, 7, 1);
  const auto out = model_forward(p, random_input(4, 5, 6, 2), mask, shift).output;
  REQUIRE(out.same_shape(mask.mask));
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double expect = mask.mask.data[i] * shift.mean.data[i] + mask.shift.data[i];
    CHECK(out.data[i] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("boundary values are imposed exactly for any parameters") {
  const ModelParams p = model_init(small_config(2));
  const MaskSpec mask = left_clamp(2, 9, 9);
  const auto out = model_forward(p, random_input(4, 8, 8, 5), mask, random_shift(2, 9, 9, 6)).output;
  for (int c = 0; c < 2; ++c)
    for (int j = 0; j < 9; ++j) CHECK(out.at(c, j, 0) == 0.5 + c);
  CHECK(all_finite(out));
}

TEST_CASE("reverse pass matches central differences") {
  for (int modes : {0, 2}) {
    ModelConfig c = small_config(modes);
    c.hidden_channels = 4;
    for (Activation act : {Activation::Gelu, Activation::Tanh}) {
      c.activation = act;
      ModelParams p = model_init(c);
      CounterRng rng(9);
      for (double& v : p.values) v += 0.1 * rng.normal();
      const Field3 in = random_input(4, 5, 5, 10);
      const MaskSpec mask = left_clamp(2, 6, 6);
      const ShiftStats shift = random_shift(2, 6, 6, 11);
      NodeField cot(2, 6, 6);
      for (double& v : cot.data) v = rng.normal();
      CHECK(max_rel_fd(p, in, mask, shift, cot) < 1e-4);
    }
  }
  // Without alignment the input lives on nodes.
  ModelConfig c = small_config();
  c.use_alignment = false;
  c.in_channels = 1;
  c.hidden_channels = 3;
  const ModelParams p = model_init(c);
  const MaskSpec mask = left_clamp(2, 5, 5);
  NodeField cot(2, 5, 5);
  CounterRng rng(1);
  for (double& v : cot.data) v = rng.normal();
  CHECK(max_rel_fd(p, random_input(1, 5, 5, 3), mask, random_shift(2, 5, 5, 4), cot) < 1e-4);
}

TEST_CASE("reverse pass is linear in the cotangent") {
  const ModelParams p = model_init(small_config(2));
  const MaskSpec mask = left_clamp(2, 8, 8);
  const auto fw = model_forward(p, random_input(4, 7, 7, 1), mask, random_shift(2, 8, 8, 2));
  NodeField u(2, 8, 8), v(2, 8, 8);
  u.data = random_input(2, 8, 8, 3).data;
  v.data = random_input(2, 8, 8, 4).data;
  NodeField w = u;
  scale(w, 2.0);
  axpy(-0.5, v, w);
  const auto gu = model_vjp(p, fw.tape, u);
  const auto gv = model_vjp(p, fw.tape, v);
  const auto gw = model_vjp(p, fw.tape, w);
  double worst = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < gw.size(); ++i) {
    worst = std::max(worst, std::abs(gw[i] - (2.0 * gu[i] - 0.5 * gv[i])));
    ref = std::max(ref, std::abs(gw[i]));
  }
  CHECK(worst <= 1e-12 * ref);
}

TEST_CASE("one parameter set serves several resolutions") {
  ModelConfig c = small_config(3);
  c.out_channels = 1;
  const ModelParams p = model_init(c);
  for (int n : {17, 33, 65}) {
    MaskSpec mask{NodeField(1, n, n, 1.0), NodeField(1, n, n, 0.0)};
    ShiftStats shift{NodeField(1, n, n, 0.0), NodeField(1, n, n, 1.0)};
    const auto out = model_forward(p, random_input(4, n - 1, n - 1, n), mask, shift).output;
    CHECK(out.rows == n);
    CHECK(out.cols == n);
    CHECK(all_finite(out));
  }
  // The spectral path needs at least 2m samples per axis.
  MaskSpec mask{NodeField(1, 5, 5, 1.0), NodeField(1, 5, 5, 0.0)};
  ShiftStats shift{NodeField(1, 5, 5, 0.0), NodeField(1, 5, 5, 1.0)};
  CHECK_THROWS_AS(model_forward(p, random_input(4, 4, 4, 1), mask, shift), ShapeMismatch);
  CHECK_THROWS_AS(model_forward(p, random_input(3, 16, 16, 1), mask, shift), ShapeMismatch);
}

TEST_CASE("nodal field model passes its parameters through the output stages") {
  NodalFieldModel m(1, 4, 4);
  CounterRng rng(2);
  for (double& v : m.parameters()) v = rng.normal();
  MaskSpec mask = left_clamp(1, 4, 4);
  const ShiftStats shift = random_shift(1, 4, 4, 3);
  const auto fw = m.forward(Field3(1, 3, 3), mask, shift);
  for (std::size_t i = 0; i < 16; ++i) {
    const double expect = mask.mask.data[i] * (m.parameters()[i] * shift.std.data[i] + shift.mean.data[i]) +
                          mask.shift.data[i];
    CHECK(fw.output.data[i] == doctest::Approx(expect).epsilon(1e-15));
  }
  NodeField cot(1, 4, 4, 1.0);
  const auto g = m.vjp(fw.tape, cot);
  for (std::size_t i = 0; i < 16; ++i) CHECK(g[i] == doctest::Approx(mask.mask.data[i] * shift.std.data[i]));
}

TEST_CASE("checkpoint round trip and corruption") {
  const auto dir = std::filesystem::temp_directory_path() / "vol_test_model";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "m.ckpt").string();
  ModelConfig c = small_config(2);
  c.activation = Activation::Tanh;
  c.input_offset = 0.25;
  c.input_scale = 3.0;
  const ModelParams p = model_init(c);
  save_checkpoint(p, path);
  const ModelParams q = load_checkpoint(path);
  CHECK(q.values == p.values);
  CHECK(q.config.hidden_channels == c.hidden_channels);
  CHECK(q.config.spectral_modes == 2);
  CHECK(q.config.activation == Activation::Tanh);
  CHECK(q.config.input_offset == 0.25);
  CHECK(q.config.input_scale == 3.0);

  // Header with a different layer count no longer matches the payload.
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  const auto pos = text.find("n_layers: 2");
  REQUIRE(pos != std::string::npos);
  text.replace(pos, 11, "n_layers: 3");
  const std::string bad = (dir / "bad.ckpt").string();
  std::ofstream(bad, std::ios::binary) << text;
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  std::ofstream(bad, std::ios::binary) << "not a checkpoint";
  CHECK_THROWS_AS(load_checkpoint(bad), FormatError);
  CHECK_THROWS(load_checkpoint((dir / "missing.ckpt").string()));
  std::filesystem::remove_all(dir);
}
