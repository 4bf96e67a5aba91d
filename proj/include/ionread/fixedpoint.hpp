#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "ionread/nn.hpp"

namespace ionread {

struct QuantizeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Q16.16 signed fixed point: value = register / 2^16, register is int32.
constexpr int kFixedFracBits = 16;
constexpr double kFixedScale = 65536.0;

/// Round-to-nearest-even quantization of one value. Throws QuantizeError
/// (listing the value) when |x| >= 2^15 or the register would overflow.
std::int32_t fixed_from_double(double x);
inline double fixed_to_double(std::int32_t q) { return static_cast<double>(q) / kFixedScale; }

/// Dense/ReLU network with Q16.16 weights, 64-bit multiply-accumulate and
/// saturating 32-bit writeback. Immutable after quantize().
struct FixedPointNet {
  NetworkSpec spec;
  std::vector<std::vector<std::int32_t>> weights;  // row-major, empty for relu
  std::vector<std::vector<std::int32_t>> biases;
  InputNorm norm;                 // applied to counts before quantization
  double max_quant_error = 0.0;   // max |dequantized - original| over params
};

/// Quantizes a trained dense/relu stack. Layers other than Dense and Relu
/// are rejected (the embedded target runs the fully-connected net only).
FixedPointNet quantize(const NetworkSpec& spec, const Params& params, const InputNorm& norm = {});

struct FixedInferResult {
  StateLabel label = StateLabel::Dark;
  long saturation_events = 0;
  /// trace[0] is the quantized input; trace[i] the activations after layer
  /// i-1. Saturated entries are clamped to the int32 limits.
  std::vector<std::vector<std::int32_t>> trace;
};

/// Integer forward pass; verdict Bright iff y[0] > y[1] (tie is Dark), the
/// same rule as the floating-point classifier.
FixedInferResult fixed_infer(const FixedPointNet& net, std::span<const int> counts);

/// Interval-arithmetic bound on |activation| over every layer, for raw
/// counts in [count_lo, count_hi]. If this is below 2^15 no saturation can
/// occur for such inputs.
double activation_abs_bound(const FixedPointNet& net, double count_lo, double count_hi);

struct LatencyStats {
  double median_ns = 0.0;
  double p99_ns = 0.0;
  long n_trials = 0;
};

/// Wall-clock statistics for repeated fixed_infer calls on a fixed mid-range
/// input. Report-only; absolute values are hardware-dependent.
LatencyStats latency_bench(const FixedPointNet& net, long n_trials);

}  // namespace ionread
