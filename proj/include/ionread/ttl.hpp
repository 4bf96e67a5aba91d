#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ionread/physics.hpp"

namespace ionread {

/// Gated photon counter driven by a divided system clock, as on the readout
/// board: a 100 MHz clock divided by 3000 gives the 33.333 kHz sub-bin clock
/// (30 us sub-bins); the gate (nominally 1.67 kHz, 300 us high) opens the
/// counting window. All simulation timestamps are integer nanoseconds.
struct CounterConfig {
  double clock_hz = 100e6;
  std::int64_t divider_ratio = 3000;
  std::int64_t gate_duration_ns = 300000;
  int n_sub_bins = 10;

  /// System-clock period. The emulation requires an integer nanosecond tick.
  std::int64_t tick_ns() const { return static_cast<std::int64_t>(1e9 / clock_hz + 0.5); }
  std::int64_t sub_bin_ns() const { return divider_ratio * tick_ns(); }

  /// Throws std::invalid_argument on: non-positive or non-integer-period
  /// clock, ratio < 1, n_sub_bins < 1, or a gate too short to cover the bins.
  void validate() const;
};

/// Rising edges seen by the counter, with the gate window they belong to.
struct TtlEdgeStream {
  std::vector<std::int64_t> edges_ns;  // strictly increasing
  std::int64_t gate_start_ns = 0;
  std::int64_t gate_duration_ns = 0;
};

/// Turns per-sub-bin counts into rising-edge timestamps: counts[i] edges on
/// distinct clock ticks, uniform over sub-bin i. Sub-bin i spans
/// [t0 + i*sub_bin, t0 + (i+1)*sub_bin) where t0 is the first clock tick at
/// or after gate_start_ns. `sub_bin_duration_s` is the duration the counts
/// were recorded at (a LabeledDataset field) and must match the divider.
/// Throws std::overflow_error when a sub-bin holds more counts than it has
/// ticks, std::invalid_argument on duration or sub-bin-count mismatch.
TtlEdgeStream simulate_ttl(const PhotonTrajectory& traj, double sub_bin_duration_s,
                           const CounterConfig& cfg, std::uint64_t seed,
                           std::int64_t gate_start_ns = 0);

/// Recovers per-sub-bin counts from an edge stream. The divider phase resets
/// on the gate rising edge; boundaries sit on clock ticks, so each one lies
/// within one tick (10 ns at default clock) of its nominal position. An edge
/// exactly on a boundary belongs to the later sub-bin; edges before the gate
/// or after the last sub-bin are discarded.
std::vector<int> divider_counter(const TtlEdgeStream& stream, const CounterConfig& cfg);

}  // namespace ionread
