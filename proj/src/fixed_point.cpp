#include "drnn/fixed_point.hpp"

#include <charconv>
#include <cmath>

#include "drnn/error.hpp"

namespace drnn {

void FixedPointFormat::validate() const {
  if (int_bits < 1 || frac_bits < 0 || int_bits + frac_bits > 16) {
    throw UsageError("fixed-point format " + to_string() +
                     " invalid: need int_bits >= 1, frac_bits >= 0, int_bits + frac_bits <= 16");
  }
}

double FixedPointFormat::scale() const { return std::ldexp(1.0, frac_bits); }

FixedPointFormat FixedPointFormat::parse(std::string_view text) {
  if (!text.empty() && (text.front() == 'Q' || text.front() == 'q')) text.remove_prefix(1);
  const auto dot = text.find('.');
  FixedPointFormat fmt;
  if (dot == std::string_view::npos) throw UsageError("fixed-point format must look like m.n");
  const auto parse_int = [](std::string_view s, int& out) {
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && p == s.data() + s.size() && !s.empty();
  };
  if (!parse_int(text.substr(0, dot), fmt.int_bits) || !parse_int(text.substr(dot + 1), fmt.frac_bits)) {
    throw UsageError("fixed-point format must look like m.n");
  }
  fmt.validate();
  return fmt;
}

std::string FixedPointFormat::to_string() const {
  return "Q" + std::to_string(int_bits) + "." + std::to_string(frac_bits);
}

std::int16_t quantize(double x, const FixedPointFormat& fmt) {
  fmt.validate();
  if (std::isnan(x)) throw UsageError("quantize: NaN input");
  const double scaled = x * fmt.scale();
  if (scaled >= fmt.raw_max()) return static_cast<std::int16_t>(fmt.raw_max());
  if (scaled <= fmt.raw_min()) return static_cast<std::int16_t>(fmt.raw_min());
  // nearbyint honours the default round-half-to-even mode.
  return static_cast<std::int16_t>(std::nearbyint(scaled));
}

double dequantize(std::int64_t raw, const FixedPointFormat& fmt) {
  return static_cast<double>(raw) / fmt.scale();
}

FixedPointTensor FixedPointTensor::from_matrix(const Matrix& m, const FixedPointFormat& fmt) {
  FixedPointTensor t;
  t.format = fmt;
  t.rows = static_cast<std::size_t>(m.rows());
  t.cols = static_cast<std::size_t>(m.cols());
  t.raw.reserve(t.rows * t.cols);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) t.raw.push_back(quantize(m(r, c), fmt));
  }
  return t;
}

FixedPointTensor FixedPointTensor::from_vector(const Vector& v, const FixedPointFormat& fmt) {
  FixedPointTensor t;
  t.format = fmt;
  t.rows = static_cast<std::size_t>(v.size());
  t.cols = 1;
  t.raw.reserve(t.rows);
  for (Eigen::Index i = 0; i < v.size(); ++i) t.raw.push_back(quantize(v[i], fmt));
  return t;
}

Matrix FixedPointTensor::to_matrix() const {
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = dequantize(at(r, c), format);
    }
  }
  return m;
}

}  // namespace drnn
