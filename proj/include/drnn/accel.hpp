#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <iosfwd>
#include <span>
#include <vector>

#include "drnn/fixed_point.hpp"
#include "drnn/lm.hpp"

namespace drnn {

// Geometry and timing of the MAC array. Row r of the weight matrix is owned
// by PE r / lanes_per_pe; every lane holds one row and accumulates one dot
// product of length chunk_len.
struct AcceleratorConfig {
  std::size_t num_pes = 5;
  std::size_t lanes_per_pe = 10;
  std::size_t chunk_len = 50;
  double clock_mhz = 200.0;
  std::size_t pipeline_fill = 0;

  std::size_t rows() const { return num_pes * lanes_per_pe; }
  std::size_t multipliers() const { return num_pes * lanes_per_pe; }
  void validate() const;
};

// Largest dot-product length for which 16x16-bit products cannot overflow
// the 40-bit accumulators.
inline constexpr std::size_t kMaxChunkLen = 256;
inline constexpr int kAccumulatorBits = 40;

struct BatchReport {
  std::uint64_t mult_ops = 0;
  std::uint64_t add_ops = 0;
  std::uint64_t latency_cycles = 0;
  double latency_ns = 0.0;
  double gops = 0.0;  // (mult_ops + add_ops) / latency_ns

  friend bool operator==(const BatchReport&, const BatchReport&) = default;
};

// Stream moves are counted apart from compute latency.
struct TransferReport {
  std::uint64_t input_packets = 0;
  std::uint64_t output_packets = 0;
  std::uint64_t transfer_cycles = 0;
};

struct StreamPacket {
  std::uint32_t payload = 0;
  bool last = false;

  friend bool operator==(const StreamPacket&, const StreamPacket&) = default;
};

// In-order FIFO between the DMA engine and the core.
class StreamChannel {
 public:
  void push(StreamPacket p) { fifo_.push_back(p); }
  StreamPacket pop();
  bool empty() const { return fifo_.empty(); }
  std::size_t size() const { return fifo_.size(); }

 private:
  std::deque<StreamPacket> fifo_;
};

struct BatchResult {
  std::vector<std::int64_t> y;  // sign-extended 40-bit accumulators
  BatchReport report;
};

class AcceleratorCore {
 public:
  explicit AcceleratorCore(AcceleratorConfig config = {});

  const AcceleratorConfig& config() const { return config_; }

  // Latches a rows x chunk_len weight matrix (row-major) until the next load.
  void load_weights(std::span<const std::int16_t> weights, std::size_t rows, std::size_t cols);
  void load_weights(const FixedPointTensor& weights);
  bool weights_loaded() const { return loaded_; }

  // One batch: broadcast x[k] to every lane on cycle k.
  BatchResult run_batch(std::span<const std::int16_t> x);

  // Reads one input frame from `in`, runs it and writes the output frame to
  // `out`. Throws FramingError on a short frame or a missing last flag.
  BatchReport serve(StreamChannel& in, StreamChannel& out);

  const std::vector<BatchReport>& trace() const { return trace_; }
  std::uint64_t total_cycles() const { return total_cycles_; }

 private:
  struct ProcessingElement {
    std::size_t first_row = 0;
    std::vector<std::int64_t> acc;  // one per lane
  };

  AcceleratorConfig config_;
  std::vector<std::int16_t> weights_;  // rows x chunk_len, row-major
  bool loaded_ = false;
  std::vector<ProcessingElement> pes_;
  std::vector<BatchReport> trace_;
  std::uint64_t total_cycles_ = 0;
};

// Wraps a value to a signed 40-bit two's-complement accumulator.
std::int64_t wrap_accumulator(std::int64_t v);

// Memory-to-stream framing: one sign-extended operand per word, last on the
// final word.
std::vector<StreamPacket> frame_input(std::span<const std::int16_t> x);
// Stream-to-memory: two words per accumulator (low 32 bits, then the
// sign-extended high bits), last on the final word.
std::vector<StreamPacket> frame_output(std::span<const std::int64_t> y);
std::vector<std::int64_t> unframe_output(std::span<const StreamPacket> packets, std::size_t rows);

// Models the DMA mover around a core: host buffer -> stream -> core -> stream -> host.
class DmaEngine {
 public:
  explicit DmaEngine(AcceleratorCore& core) : core_(core) {}

  // Sends exactly one frame. Leftover packets after the frame's last flag are
  // a FramingError.
  BatchResult transfer(std::span<const StreamPacket> frame);
  BatchResult transfer(std::span<const std::int16_t> x) { return transfer(frame_input(x)); }

  const TransferReport& transfers() const { return transfers_; }

 private:
  AcceleratorCore& core_;
  TransferReport transfers_;
};

// Frames x, drives the core through the stream interface and unframes y.
BatchResult stream_roundtrip(AcceleratorCore& core, std::span<const std::int16_t> x);

struct FixedMatvec {
  Vector y;
  BatchReport report;
};

// Quantizes W and x to fmt, runs one batch and rescales the accumulators by 2^-2n.
FixedMatvec matvec_fixed(AcceleratorCore& core, const Matrix& w, const Vector& x,
                         const FixedPointFormat& fmt);

// chunk_len * (|x|max * d + |W|max * d + d^2), d = 2^-(n+1).
double matvec_error_bound(std::size_t chunk_len, double x_max, double w_max,
                          const FixedPointFormat& fmt);

void write_batch_trace(std::ostream& out, std::span<const BatchReport> reports);

}  // namespace drnn
