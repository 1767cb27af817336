#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "drnn/lm.hpp"

namespace drnn {

// Signed Q(m.n) format stored in at most 16 bits. The sign bit is counted in
// int_bits, so Q8.8 spans [-128, 128 - 2^-8].
struct FixedPointFormat {
  int int_bits = 8;
  int frac_bits = 8;

  void validate() const;
  int width() const { return int_bits + frac_bits; }
  double scale() const;  // 2^frac_bits
  std::int32_t raw_min() const { return -(std::int32_t{1} << (width() - 1)); }
  std::int32_t raw_max() const { return (std::int32_t{1} << (width() - 1)) - 1; }
  double min_value() const { return raw_min() / scale(); }
  double max_value() const { return raw_max() / scale(); }
  // Half a quantization step: the worst-case rounding error inside the range.
  double half_step() const { return 0.5 / scale(); }

  // Accepts "8.8" or "Q8.8".
  static FixedPointFormat parse(std::string_view text);
  std::string to_string() const;

  friend bool operator==(const FixedPointFormat&, const FixedPointFormat&) = default;
};

// Round-to-nearest-even of x * 2^n, saturated to the format's range.
// Throws UsageError for NaN.
std::int16_t quantize(double x, const FixedPointFormat& fmt);
double dequantize(std::int64_t raw, const FixedPointFormat& fmt);

struct FixedPointTensor {
  FixedPointFormat format;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<std::int16_t> raw;  // row-major

  static FixedPointTensor from_matrix(const Matrix& m, const FixedPointFormat& fmt);
  static FixedPointTensor from_vector(const Vector& v, const FixedPointFormat& fmt);
  Matrix to_matrix() const;
  std::int16_t at(std::size_t r, std::size_t c) const { return raw[r * cols + c]; }
};

}  // namespace drnn
