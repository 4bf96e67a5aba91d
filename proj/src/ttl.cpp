#include "ionread/ttl.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>

#include "ionread/rng.hpp"

namespace ionread {

void CounterConfig::validate() const {
  if (!(clock_hz > 0.0)) throw std::invalid_argument("counter: clock must be positive");
  const double period_ns = 1e9 / clock_hz;
  if (std::abs(period_ns - std::nearbyint(period_ns)) > 1e-9 || period_ns < 1.0)
    throw std::invalid_argument("counter: clock period must be a whole number of nanoseconds");
  if (divider_ratio < 1) throw std::invalid_argument("counter: divider ratio must be >= 1");
  if (n_sub_bins < 1) throw std::invalid_argument("counter: need at least one sub-bin");
  if (gate_duration_ns < static_cast<std::int64_t>(n_sub_bins) * sub_bin_ns())
    throw std::invalid_argument("counter: gate shorter than the counting window");
}

namespace {

/// First clock tick at or after t.
std::int64_t align_up(std::int64_t t, std::int64_t tick) {
  const std::int64_t r = t % tick;
  return r == 0 ? t : t + (tick - r);
}

}  // namespace

TtlEdgeStream simulate_ttl(const PhotonTrajectory& traj, double sub_bin_duration_s,
                           const CounterConfig& cfg, std::uint64_t seed,
                           std::int64_t gate_start_ns) {
  cfg.validate();
  if (gate_start_ns < 0) throw std::invalid_argument("simulate_ttl: negative gate start");
  if (static_cast<int>(traj.counts.size()) != cfg.n_sub_bins)
    throw std::invalid_argument("simulate_ttl: trajectory has " +
                                std::to_string(traj.counts.size()) + " sub-bins, counter expects " +
                                std::to_string(cfg.n_sub_bins));
  const double want_s = static_cast<double>(cfg.sub_bin_ns()) * 1e-9;
  if (std::abs(sub_bin_duration_s - want_s) > 1e-12 * want_s)
    throw std::invalid_argument("simulate_ttl: sub-bin duration does not match the divider");

  const std::int64_t tick = cfg.tick_ns();
  const std::int64_t t0 = align_up(gate_start_ns, tick);
  TtlEdgeStream stream;
  stream.gate_start_ns = gate_start_ns;
  stream.gate_duration_ns = cfg.gate_duration_ns;

  Rng rng(seed);
  for (std::size_t i = 0; i < traj.counts.size(); ++i) {
    const int c = traj.counts[i];
    if (c < 0) throw std::invalid_argument("simulate_ttl: negative count");
    if (c > cfg.divider_ratio)
      throw std::overflow_error("simulate_ttl: sub-bin " + std::to_string(i) + " holds " +
                                std::to_string(c) + " counts but only " +
                                std::to_string(cfg.divider_ratio) + " ticks");
    // Floyd's algorithm: c distinct ticks uniform in [0, ratio)
    std::set<std::int64_t> picks;
    for (std::int64_t j = cfg.divider_ratio - c; j < cfg.divider_ratio; ++j) {
      const std::int64_t t = static_cast<std::int64_t>(
          rng.bounded(static_cast<std::uint64_t>(j) + 1));
      picks.insert(picks.count(t) ? j : t);
    }
    const std::int64_t bin_start = t0 + static_cast<std::int64_t>(i) * cfg.sub_bin_ns();
    for (std::int64_t p : picks) stream.edges_ns.push_back(bin_start + p * tick);
  }
  return stream;
}

std::vector<int> divider_counter(const TtlEdgeStream& stream, const CounterConfig& cfg) {
  cfg.validate();
  const std::int64_t tick = cfg.tick_ns();
  const std::int64_t t0 = align_up(stream.gate_start_ns, tick);
  const std::int64_t sub = cfg.sub_bin_ns();
  const std::int64_t window_end = t0 + static_cast<std::int64_t>(cfg.n_sub_bins) * sub;

  std::vector<int> counts(static_cast<std::size_t>(cfg.n_sub_bins), 0);
  std::int64_t prev = std::numeric_limits<std::int64_t>::min();
  for (const std::int64_t e : stream.edges_ns) {
    if (e <= prev) throw std::invalid_argument("divider_counter: edges must strictly increase");
    prev = e;
    if (e < stream.gate_start_ns || e >= window_end) continue;  // gate low / past window
    // the sliver [gate_start, t0) belongs to the first sub-bin: the counter
    // is already enabled, the divider just has not ticked yet
    const std::int64_t k = e < t0 ? 0 : (e - t0) / sub;
    counts[static_cast<std::size_t>(k)] += 1;
  }
  return counts;
}

}  // namespace ionread
