#include "drnn/cosim.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>

#include "drnn/error.hpp"

namespace drnn {

GoldenResult golden_test(const GoldenOptions& options) {
  const auto& cfg = options.config;
  cfg.validate();
  const std::size_t rows = cfg.rows();
  const std::size_t n = cfg.chunk_len;

  std::vector<std::int16_t> x;
  if (options.x) {
    x = *options.x;
    if (x.size() != n) throw UsageError("golden_test: x must have chunk_len elements");
  } else {
    for (std::size_t k = 0; k < n; ++k) x.push_back(static_cast<std::int16_t>(k + 1));
  }

  std::vector<std::int16_t> w(rows * n);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < n; ++k) w[r * n + k] = static_cast<std::int16_t>(r + 1);
  }

  GoldenResult result;
  // Software side: the plain double loop.
  result.software.resize(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    std::int64_t sum = 0;
    for (std::size_t k = 0; k < n; ++k) sum += std::int64_t{w[r * n + k]} * x[k];
    result.software[r] = sum;
  }

  if (options.fault) {
    const auto& f = *options.fault;
    if (f.row >= rows || f.col >= n) throw UsageError("golden_test: fault position out of range");
    w[f.row * n + f.col] = f.value;
  }

  AcceleratorCore core(cfg);
  core.load_weights(w, rows, n);
  auto batch = stream_roundtrip(core, x);
  result.hardware = std::move(batch.y);
  result.report = batch.report;

  for (std::size_t r = 0; r < rows; ++r) {
    if (result.hardware[r] != result.software[r]) {
      result.mismatches.push_back({r, result.software[r], result.hardware[r]});
    }
  }
  result.pass = result.mismatches.empty();
  return result;
}

OffloadResult offload_gate_preactivation(AcceleratorCore& core, const LstmLayerParams& layer,
                                         Gate gate, const Vector& h_prev, TokenId x,
                                         const FixedPointFormat& fmt) {
  layer.validate();
  const auto& cfg = core.config();
  const auto hidden = layer.hidden();
  if (hidden != cfg.chunk_len || hidden != cfg.rows()) {
    throw UsageError("offload: hidden size " + std::to_string(hidden) +
                     " does not match the core (" + std::to_string(cfg.rows()) + " rows, chunk " +
                     std::to_string(cfg.chunk_len) + ")");
  }
  if (static_cast<std::size_t>(h_prev.size()) != hidden) throw UsageError("offload: h_prev length mismatch");
  if (x >= layer.input_dim()) throw UsageError("offload: token id outside vocabulary");

  const Matrix& w = layer.recurrent[gate];
  const Vector host_term = layer.input[gate].col(x) + layer.bias[gate];

  OffloadResult out;
  auto mv = matvec_fixed(core, w, h_prev, fmt);
  out.accel = mv.y + host_term;
  out.report = mv.report;
  out.reference = w * h_prev + host_term;
  out.max_abs_err = (out.accel - out.reference).cwiseAbs().maxCoeff();
  out.error_bound = matvec_error_bound(cfg.chunk_len, h_prev.cwiseAbs().maxCoeff(),
                                       w.cwiseAbs().maxCoeff(), fmt);
  return out;
}

const std::vector<CitedBaseline>& cited_baselines() {
  static const std::vector<CitedBaseline> baselines = {
      {"lstm-cell-fpga (cited)", "Fixed point(Q8.8)", 0.2837, "GOPS"},
      {"nnlm-fpga (cited)", "Float-32", 7.26, "GFLOPS"},
  };
  return baselines;
}

ThroughputTable throughput_report(const AcceleratorConfig& config, const FixedPointFormat& fmt) {
  fmt.validate();
  AcceleratorCore core(config);
  std::vector<std::int16_t> zeros(config.rows() * config.chunk_len, 0);
  core.load_weights(zeros, config.rows(), config.chunk_len);

  ThroughputTable table;
  table.modeled = core.run_batch(std::vector<std::int16_t>(config.chunk_len, 0)).report;
  const double gops = table.modeled.gops;
  for (const auto& b : cited_baselines()) {
    table.rows.push_back({b.label, b.precision, b.throughput, b.unit, gops / b.throughput, false});
  }
  table.rows.push_back({"mac-array model", "Fixed point(" + fmt.to_string() + ")", gops, "GOPS", 1.0, true});
  return table;
}

void write_throughput_csv(std::ostream& out, const ThroughputTable& table) {
  out << "design,precision,throughput,unit,speedup_of_modeled\n";
  for (const auto& r : table.rows) {
    out << r.label << ',' << r.precision << ',' << r.throughput << ',' << r.unit << ','
        << std::fixed << std::setprecision(4) << r.speedup << std::defaultfloat
        << std::setprecision(6) << '\n';
  }
}

void write_throughput_text(std::ostream& out, const ThroughputTable& table) {
  out << std::left << std::setw(26) << "design" << std::setw(22) << "precision" << std::right
      << std::setw(12) << "throughput" << "  " << std::left << std::setw(7) << "unit" << std::right
      << std::setw(10) << "speedup" << '\n';
  for (const auto& r : table.rows) {
    out << std::left << std::setw(26) << r.label << std::setw(22) << r.precision << std::right
        << std::setw(12) << r.throughput << "  " << std::left << std::setw(7) << r.unit << std::right
        << std::setw(9) << std::fixed << std::setprecision(2) << r.speedup << "x" << std::defaultfloat
        << std::setprecision(6) << '\n';
  }
}

}  // namespace drnn
