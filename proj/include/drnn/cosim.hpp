#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "drnn/accel.hpp"
#include "drnn/fixed_point.hpp"
#include "drnn/lm.hpp"

namespace drnn {

struct WeightFault {
  std::size_t row = 0;
  std::size_t col = 0;
  std::int16_t value = 0;
};

struct GoldenOptions {
  AcceleratorConfig config;
  // Defaults to 1..chunk_len.
  std::optional<std::vector<std::int16_t>> x;
  // Corrupts one weight on the hardware path only.
  std::optional<WeightFault> fault;
};

struct GoldenMismatch {
  std::size_t index = 0;
  std::int64_t expected = 0;
  std::int64_t got = 0;
};

struct GoldenResult {
  bool pass = false;
  std::vector<std::int64_t> hardware;
  std::vector<std::int64_t> software;
  std::vector<GoldenMismatch> mismatches;
  BatchReport report;
};

// Weights W[r][k] = r + 1 streamed through the core against the plain
// double-loop sum. With the defaults the output is 1275 * (r + 1).
GoldenResult golden_test(const GoldenOptions& options = {});

struct OffloadResult {
  Vector accel;        // fixed-point recurrent term + host-side input column + bias
  Vector reference;    // 64-bit float
  double max_abs_err = 0.0;
  double error_bound = 0.0;  // matvec_fixed bound for the recurrent term
  BatchReport report;
};

// Gate pre-activation W h_prev + U[:, x] + b: the recurrent product runs on
// the core, the one-hot input product is a host-side column selection.
OffloadResult offload_gate_preactivation(AcceleratorCore& core, const LstmLayerParams& layer,
                                         Gate gate, const Vector& h_prev, TokenId x,
                                         const FixedPointFormat& fmt);

// Externally published throughput figures used as comparison baselines.
struct CitedBaseline {
  std::string label;
  std::string precision;
  double throughput = 0.0;
  std::string unit;
};

const std::vector<CitedBaseline>& cited_baselines();

struct ThroughputRow {
  std::string label;
  std::string precision;
  double throughput = 0.0;
  std::string unit;
  double speedup = 0.0;  // modeled / this row's throughput
  bool modeled = false;
};

struct ThroughputTable {
  BatchReport modeled;
  std::vector<ThroughputRow> rows;
};

// Runs one batch on a fresh core to obtain the modeled GOPS and compares it
// with the cited baselines.
ThroughputTable throughput_report(const AcceleratorConfig& config = {},
                                  const FixedPointFormat& fmt = {});

void write_throughput_csv(std::ostream& out, const ThroughputTable& table);
void write_throughput_text(std::ostream& out, const ThroughputTable& table);

}  // namespace drnn
