#pragma once

// VOLF binary arrays. Layout, all little-endian:
//   "VOLF" | u32 version (1) | u32 dtype (1 = f64) | u32 ndim | u64 shape[ndim] | f64 payload
// Payload is row-major; its length is product(shape) values.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "vol/fields.hpp"

namespace vol {

struct ArrayData {
  std::vector<std::uint64_t> shape;
  std::vector<double> values;

  std::uint64_t element_count() const;
};

void write_array(std::ostream& out, const ArrayData& a);
ArrayData read_array(std::istream& in);

void write_array_file(const std::string& path, const ArrayData& a);
ArrayData read_array_file(const std::string& path);

// A stack of equally shaped fields as one (n, channels, rows, cols) array.
ArrayData stack_fields(const std::vector<Field3>& fields);
std::vector<Field3> unstack_fields(const ArrayData& a);

}  // namespace vol
