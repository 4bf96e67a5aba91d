#include "ionread/fixedpoint.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>

namespace ionread {

namespace {

constexpr std::int64_t kRegMax = std::numeric_limits<std::int32_t>::max();
constexpr std::int64_t kRegMin = std::numeric_limits<std::int32_t>::min();

[[noreturn]] void range_fail(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  throw QuantizeError(std::string("value ") + buf + " is outside the Q16.16 range");
}

}  // namespace

std::int32_t fixed_from_double(double x) {
  if (!std::isfinite(x) || std::abs(x) >= 32768.0) range_fail(x);
  const double r = std::nearbyint(x * kFixedScale);  // FE_TONEAREST: half-to-even
  if (r > static_cast<double>(kRegMax) || r < static_cast<double>(kRegMin)) range_fail(x);
  return static_cast<std::int32_t>(r);
}

FixedPointNet quantize(const NetworkSpec& spec, const Params& params, const InputNorm& norm) {
  spec.validate();
  if (params.size() != spec.layers.size())
    throw ShapeError("quantize: parameter set does not match the layer count");
  FixedPointNet net;
  net.spec = spec;
  net.norm = norm;
  net.weights.resize(spec.layers.size());
  net.biases.resize(spec.layers.size());
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerKind kind = spec.layers[li].kind;
    if (kind == LayerKind::Relu) continue;
    if (kind != LayerKind::Dense)
      throw QuantizeError(std::string("unsupported layer kind for fixed-point inference: ") +
                          to_string(kind));
    auto quantize_all = [&net](const std::vector<double>& src, std::vector<std::int32_t>& dst) {
      dst.reserve(src.size());
      for (double v : src) {
        const std::int32_t q = fixed_from_double(v);
        dst.push_back(q);
        net.max_quant_error = std::max(net.max_quant_error, std::abs(fixed_to_double(q) - v));
      }
    };
    quantize_all(params[li].weight.data, net.weights[li]);
    quantize_all(params[li].bias.data, net.biases[li]);
  }
  return net;
}

FixedInferResult fixed_infer(const FixedPointNet& net, std::span<const int> counts) {
  if (static_cast<int>(counts.size()) != net.spec.input_width)
    throw ShapeError("fixed_infer: input width " + std::to_string(counts.size()) +
                     ", network expects " + std::to_string(net.spec.input_width));
  FixedInferResult res;
  std::vector<std::int32_t> act(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    act[i] = fixed_from_double((static_cast<double>(counts[i]) - net.norm.shift) /
                               net.norm.scale);
  res.trace.push_back(act);

  for (std::size_t li = 0; li < net.spec.layers.size(); ++li) {
    const LayerDesc& l = net.spec.layers[li];
    if (l.kind == LayerKind::Relu) {
      for (std::int32_t& v : act) v = std::max<std::int32_t>(v, 0);
    } else {
      std::vector<std::int32_t> out(static_cast<std::size_t>(l.out));
      const std::vector<std::int32_t>& w = net.weights[li];
      for (int o = 0; o < l.out; ++o) {
        std::int64_t acc = static_cast<std::int64_t>(net.biases[li][o]) << kFixedFracBits;
        const std::int32_t* row = w.data() + static_cast<long>(o) * l.in;
        for (int i = 0; i < l.in; ++i)
          acc += static_cast<std::int64_t>(row[i]) * act[i];
        std::int64_t v = acc >> kFixedFracBits;  // arithmetic shift (C++20)
        if (v > kRegMax) {
          v = kRegMax;
          ++res.saturation_events;
        } else if (v < kRegMin) {
          v = kRegMin;
          ++res.saturation_events;
        }
        out[o] = static_cast<std::int32_t>(v);
      }
      act = std::move(out);
    }
    res.trace.push_back(act);
  }

  if (act.size() != 2) throw ShapeError("fixed_infer: network does not end with 2 outputs");
  res.label = act[0] > act[1] ? StateLabel::Bright : StateLabel::Dark;
  return res;
}

double activation_abs_bound(const FixedPointNet& net, double count_lo, double count_hi) {
  if (count_lo > count_hi)
    throw std::invalid_argument("activation_abs_bound: empty count interval");
  const double in_lo = (count_lo - net.norm.shift) / net.norm.scale;
  const double in_hi = (count_hi - net.norm.shift) / net.norm.scale;
  std::vector<double> lo(static_cast<std::size_t>(net.spec.input_width),
                         std::min(in_lo, in_hi));
  std::vector<double> hi(lo.size(), std::max(in_lo, in_hi));
  double worst = std::max(std::abs(lo[0]), std::abs(hi[0]));

  for (std::size_t li = 0; li < net.spec.layers.size(); ++li) {
    const LayerDesc& l = net.spec.layers[li];
    if (l.kind == LayerKind::Relu) {
      for (std::size_t i = 0; i < lo.size(); ++i) {
        lo[i] = std::max(lo[i], 0.0);
        hi[i] = std::max(hi[i], 0.0);
      }
    } else {
      std::vector<double> nlo(static_cast<std::size_t>(l.out));
      std::vector<double> nhi(nlo.size());
      for (int o = 0; o < l.out; ++o) {
        double a = fixed_to_double(net.biases[li][o]);
        double b = a;
        for (int i = 0; i < l.in; ++i) {
          const double w =
              fixed_to_double(net.weights[li][static_cast<long>(o) * l.in + i]);
          if (w >= 0.0) {
            a += w * lo[i];
            b += w * hi[i];
          } else {
            a += w * hi[i];
            b += w * lo[i];
          }
        }
        nlo[o] = a;
        nhi[o] = b;
      }
      lo = std::move(nlo);
      hi = std::move(nhi);
    }
    for (std::size_t i = 0; i < lo.size(); ++i)
      worst = std::max({worst, std::abs(lo[i]), std::abs(hi[i])});
  }
  return worst;
}

LatencyStats latency_bench(const FixedPointNet& net, long n_trials) {
  if (n_trials < 1) throw std::invalid_argument("latency_bench: n_trials must be >= 1");
  const std::vector<int> input(static_cast<std::size_t>(net.spec.input_width), 2);
  // warm the caches before timing
  volatile int sink = 0;
  for (int i = 0; i < 32; ++i) sink = sink + static_cast<int>(fixed_infer(net, input).label);

  std::vector<double> ns(static_cast<std::size_t>(n_trials));
  using Clock = std::chrono::steady_clock;
  for (long i = 0; i < n_trials; ++i) {
    const auto t0 = Clock::now();
    sink = sink + static_cast<int>(fixed_infer(net, input).label);
    const auto t1 = Clock::now();
    ns[static_cast<std::size_t>(i)] =
        std::chrono::duration<double, std::nano>(t1 - t0).count();
  }
  std::sort(ns.begin(), ns.end());
  LatencyStats st;
  st.n_trials = n_trials;
  st.median_ns = ns[ns.size() / 2];
  st.p99_ns = ns[static_cast<std::size_t>(0.99 * static_cast<double>(ns.size() - 1))];
  return st;
}

}  // namespace ionread
