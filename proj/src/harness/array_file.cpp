#include "vol/harness/array_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "vol/errors.hpp"

namespace vol {

static_assert(std::endian::native == std::endian::little, "VOLF I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'V', 'O', 'L', 'F'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint32_t kDtypeF64 = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw FormatError("VOLF: truncated header");
  return v;
}

}  // namespace

std::uint64_t ArrayData::element_count() const {
  std::uint64_t n = 1;
  for (auto s : shape) n *= s;
  return n;
}

void write_array(std::ostream& out, const ArrayData& a) {
  if (a.element_count() != a.values.size()) throw ShapeMismatch("VOLF: shape does not match value count");
  out.write(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  put<std::uint32_t>(out, kDtypeF64);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(a.shape.size()));
  for (auto s : a.shape) put<std::uint64_t>(out, s);
  out.write(reinterpret_cast<const char*>(a.values.data()), std::streamsize(a.values.size() * sizeof(double)));
  if (!out) throw FormatError("VOLF: write failed");
}

ArrayData read_array(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError("VOLF: bad magic");
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) throw FormatError("VOLF: unsupported version " + std::to_string(version));
  const auto dtype = get<std::uint32_t>(in);
  if (dtype != kDtypeF64) throw FormatError("VOLF: unsupported dtype tag " + std::to_string(dtype));
  const auto ndim = get<std::uint32_t>(in);
  if (ndim > 16) throw FormatError("VOLF: implausible dimension count");
  ArrayData a;
  a.shape.resize(ndim);
  for (auto& s : a.shape) s = get<std::uint64_t>(in);
  const std::uint64_t n = a.element_count();
  if (n > (std::uint64_t(1) << 34)) throw FormatError("VOLF: implausible payload size");
  a.values.resize(n);
  if (!in.read(reinterpret_cast<char*>(a.values.data()), std::streamsize(n * sizeof(double))))
    throw FormatError("VOLF: truncated payload");
  return a;
}

void write_array_file(const std::string& path, const ArrayData& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot open " + path + " for writing");
  write_array(out, a);
}

ArrayData read_array_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path);
  return read_array(in);
}

ArrayData stack_fields(const std::vector<Field3>& fields) {
  ArrayData a;
  if (fields.empty()) {
    a.shape = {0, 0, 0, 0};
    return a;
  }
  const Field3& f0 = fields.front();
  a.shape = {fields.size(), std::uint64_t(f0.channels), std::uint64_t(f0.rows), std::uint64_t(f0.cols)};
  a.values.reserve(fields.size() * f0.size());
  for (const auto& f : fields) {
    require_same_shape(f0, f, "stack_fields");
    a.values.insert(a.values.end(), f.data.begin(), f.data.end());
  }
  return a;
}

std::vector<Field3> unstack_fields(const ArrayData& a) {
  if (a.shape.size() != 4) throw FormatError("VOLF: expected a 4-d field stack");
  std::vector<Field3> out;
  const std::size_t n = a.shape[0];
  Field3 proto(int(a.shape[1]), int(a.shape[2]), int(a.shape[3]));
  const std::size_t sz = proto.size();
  for (std::size_t i = 0; i < n; ++i) {
    Field3 f = proto;
    std::copy(a.values.begin() + i * sz, a.values.begin() + (i + 1) * sz, f.data.begin());
    out.push_back(std::move(f));
  }
  return out;
}

}  // namespace vol
