#include "drnn/accel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <string>

#include "drnn/error.hpp"

namespace drnn {

void AcceleratorConfig::validate() const {
  if (num_pes < 1) throw UsageError("accelerator: num_pes must be at least 1");
  if (lanes_per_pe < 1) throw UsageError("accelerator: lanes_per_pe must be at least 1");
  if (chunk_len < 1 || chunk_len > kMaxChunkLen) {
    throw UsageError("accelerator: chunk_len must be in [1, " + std::to_string(kMaxChunkLen) + "]");
  }
  if (!(clock_mhz > 0.0) || !std::isfinite(clock_mhz)) {
    throw UsageError("accelerator: clock_mhz must be positive");
  }
}

StreamPacket StreamChannel::pop() {
  if (fifo_.empty()) throw FramingError("stream underflow: frame ended without a last flag");
  const auto p = fifo_.front();
  fifo_.pop_front();
  return p;
}

std::int64_t wrap_accumulator(std::int64_t v) {
  constexpr int shift = 64 - kAccumulatorBits;
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(v) << shift) >> shift;
}

AcceleratorCore::AcceleratorCore(AcceleratorConfig config) : config_(config) {
  config_.validate();
  pes_.resize(config_.num_pes);
  for (std::size_t p = 0; p < config_.num_pes; ++p) {
    pes_[p].first_row = p * config_.lanes_per_pe;
    pes_[p].acc.assign(config_.lanes_per_pe, 0);
  }
}

void AcceleratorCore::load_weights(std::span<const std::int16_t> weights, std::size_t rows,
                                   std::size_t cols) {
  if (rows != config_.rows() || cols != config_.chunk_len) {
    throw UsageError("load_weights: expected " + std::to_string(config_.rows()) + "x" +
                     std::to_string(config_.chunk_len) + " weights, got " + std::to_string(rows) +
                     "x" + std::to_string(cols));
  }
  if (weights.size() != rows * cols) throw UsageError("load_weights: data size does not match shape");
  weights_.assign(weights.begin(), weights.end());
  loaded_ = true;
}

void AcceleratorCore::load_weights(const FixedPointTensor& weights) {
  load_weights(weights.raw, weights.rows, weights.cols);
}

BatchResult AcceleratorCore::run_batch(std::span<const std::int16_t> x) {
  if (!loaded_) throw UsageError("run_batch: weights not loaded");
  if (x.size() != config_.chunk_len) {
    throw UsageError("run_batch: expected " + std::to_string(config_.chunk_len) + " operands, got " +
                     std::to_string(x.size()));
  }

  BatchReport report;
  for (auto& pe : pes_) std::fill(pe.acc.begin(), pe.acc.end(), 0);

  // Pipeline fill: the array is busy but no operand pair has reached the MACs.
  report.latency_cycles += config_.pipeline_fill;

  const std::size_t n = config_.chunk_len;
  for (std::size_t k = 0; k < n; ++k) {
    const std::int64_t operand = x[k];
    for (auto& pe : pes_) {
      for (std::size_t lane = 0; lane < pe.acc.size(); ++lane) {
        const std::int64_t w = weights_[(pe.first_row + lane) * n + k];
        const std::int64_t product = w * operand;
        ++report.mult_ops;
        pe.acc[lane] = wrap_accumulator(pe.acc[lane] + product);
        ++report.add_ops;
      }
    }
    ++report.latency_cycles;
  }

  BatchResult result;
  result.y.reserve(config_.rows());
  for (const auto& pe : pes_) result.y.insert(result.y.end(), pe.acc.begin(), pe.acc.end());

  report.latency_ns = static_cast<double>(report.latency_cycles) * 1000.0 / config_.clock_mhz;
  report.gops = static_cast<double>(report.mult_ops + report.add_ops) / report.latency_ns;
  result.report = report;
  trace_.push_back(report);
  total_cycles_ += report.latency_cycles;
  return result;
}

BatchReport AcceleratorCore::serve(StreamChannel& in, StreamChannel& out) {
  const std::size_t n = config_.chunk_len;
  std::vector<std::int16_t> x;
  x.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto p = in.pop();
    const auto value = std::bit_cast<std::int32_t>(p.payload);
    if (value < INT16_MIN || value > INT16_MAX) {
      throw FramingError("stream word " + std::to_string(k) + " is not a sign-extended 16-bit operand");
    }
    x.push_back(static_cast<std::int16_t>(value));
    if (p.last && k + 1 < n) {
      throw FramingError("short frame: last flag on element " + std::to_string(k + 1) + " of " +
                         std::to_string(n));
    }
    if (!p.last && k + 1 == n) {
      throw FramingError("missing last flag on element " + std::to_string(n) + " of " +
                         std::to_string(n));
    }
  }
  auto result = run_batch(x);
  for (const auto& p : frame_output(result.y)) out.push(p);
  return result.report;
}

std::vector<StreamPacket> frame_input(std::span<const std::int16_t> x) {
  std::vector<StreamPacket> frame;
  frame.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    frame.push_back({std::bit_cast<std::uint32_t>(static_cast<std::int32_t>(x[i])), i + 1 == x.size()});
  }
  return frame;
}

std::vector<StreamPacket> frame_output(std::span<const std::int64_t> y) {
  std::vector<StreamPacket> frame;
  frame.reserve(2 * y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const auto bits = static_cast<std::uint64_t>(y[i]);
    frame.push_back({static_cast<std::uint32_t>(bits), false});
    frame.push_back({static_cast<std::uint32_t>(bits >> 32), i + 1 == y.size()});
  }
  return frame;
}

std::vector<std::int64_t> unframe_output(std::span<const StreamPacket> packets, std::size_t rows) {
  if (packets.size() != 2 * rows) {
    throw FramingError("output frame has " + std::to_string(packets.size()) + " words, expected " +
                       std::to_string(2 * rows));
  }
  std::vector<std::int64_t> y;
  y.reserve(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    const auto& lo = packets[2 * i];
    const auto& hi = packets[2 * i + 1];
    if (lo.last || hi.last != (i + 1 == rows)) throw FramingError("output frame: misplaced last flag");
    const auto bits = (static_cast<std::uint64_t>(hi.payload) << 32) | lo.payload;
    y.push_back(wrap_accumulator(static_cast<std::int64_t>(bits)));
  }
  return y;
}

BatchResult DmaEngine::transfer(std::span<const StreamPacket> frame) {
  StreamChannel to_core;
  StreamChannel from_core;
  for (const auto& p : frame) to_core.push(p);
  transfers_.input_packets += frame.size();
  transfers_.transfer_cycles += frame.size();

  BatchResult result;
  result.report = core_.serve(to_core, from_core);
  if (!to_core.empty()) {
    throw FramingError(std::to_string(to_core.size()) + " extra packets after the last flag");
  }
  std::vector<StreamPacket> out;
  out.reserve(from_core.size());
  while (!from_core.empty()) out.push_back(from_core.pop());
  transfers_.output_packets += out.size();
  transfers_.transfer_cycles += out.size();
  result.y = unframe_output(out, core_.config().rows());
  return result;
}

BatchResult stream_roundtrip(AcceleratorCore& core, std::span<const std::int16_t> x) {
  DmaEngine dma(core);
  return dma.transfer(x);
}

FixedMatvec matvec_fixed(AcceleratorCore& core, const Matrix& w, const Vector& x,
                         const FixedPointFormat& fmt) {
  fmt.validate();
  const auto& cfg = core.config();
  if (static_cast<std::size_t>(w.rows()) != cfg.rows() ||
      static_cast<std::size_t>(w.cols()) != cfg.chunk_len ||
      static_cast<std::size_t>(x.size()) != cfg.chunk_len) {
    throw UsageError("matvec_fixed: expected " + std::to_string(cfg.rows()) + "x" +
                     std::to_string(cfg.chunk_len) + " weights and a length-" +
                     std::to_string(cfg.chunk_len) + " vector");
  }
  core.load_weights(FixedPointTensor::from_matrix(w, fmt));
  const auto xq = FixedPointTensor::from_vector(x, fmt);
  auto batch = core.run_batch(xq.raw);

  FixedMatvec out;
  out.y.resize(static_cast<Eigen::Index>(batch.y.size()));
  const double inv = std::ldexp(1.0, -2 * fmt.frac_bits);
  for (std::size_t i = 0; i < batch.y.size(); ++i) {
    out.y[static_cast<Eigen::Index>(i)] = static_cast<double>(batch.y[i]) * inv;
  }
  out.report = batch.report;
  return out;
}

double matvec_error_bound(std::size_t chunk_len, double x_max, double w_max,
                          const FixedPointFormat& fmt) {
  const double d = fmt.half_step();
  return static_cast<double>(chunk_len) * (x_max * d + w_max * d + d * d);
}

void write_batch_trace(std::ostream& out, std::span<const BatchReport> reports) {
  out << "batch,mult_ops,add_ops,latency_cycles,latency_ns,gops\n";
  for (std::size_t i = 0; i < reports.size(); ++i) {
    const auto& r = reports[i];
    out << i << ',' << r.mult_ops << ',' << r.add_ops << ',' << r.latency_cycles << ','
        << r.latency_ns << ',' << r.gops << '\n';
  }
}

}  // namespace drnn
