#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

namespace ionread {

enum class StateLabel : std::uint8_t { Dark = 0, Bright = 1 };

const char* to_string(StateLabel s);
StateLabel state_from_string(std::string_view text);

/// Simulator constants for one detection configuration.
///
/// Durations are seconds, rates are detected counts per second, laser powers
/// are microwatts. The flip time constants model the two processes that leak
/// population between the qubit states during detection: bright ions decay
/// into the dark manifold, dark ions get pumped bright. Both rates grow
/// linearly with laser power, so the stored constants are tied to a power:
/// `bright_decay_tau` holds at `laser_power_uw`, `dark_pump_tau_ref` holds at
/// `reference_power_uw` and is rescaled inside transition_probs().
///
/// The defaults are the simulator operating point; they were chosen so that
/// the benchmark calibration (bench::calibrate) only has to trim
/// bright_decay_tau to land on its accuracy anchor.
struct PhysicsParams {
  double laser_power_uw = 2.95;
  double p0_saturation_uw = 2.91;      // saturation power of the detection transition
  double n0_saturation_rate = 1.39e5;  // detected rate at full saturation, counts/s
  double dark_rate = 4.0e3;            // background + dark-state scatter, counts/s
  double bright_decay_tau = 30e-3;     // s, bright->dark flip constant at laser_power_uw
  double dark_pump_tau_ref = 0.020;    // s, dark->bright pump constant at reference_power_uw
  double reference_power_uw = 2.95;
  double sub_bin_duration = 3e-6;      // s
  int n_sub_bins = 100;

  /// Throws std::invalid_argument on any out-of-domain field.
  void validate() const;

  /// Stable 64-bit hash over every field; identifies datasets and reports.
  std::uint64_t fingerprint() const;

  /// Same physics at a different laser power. Flip rates scale linearly with
  /// power, so bright_decay_tau is rescaled here; the dark pump constant stays
  /// referenced to reference_power_uw and is rescaled at use.
  PhysicsParams at_power(double power_uw) const;

  /// Same physics, different detection clocking.
  PhysicsParams rebinned(double sub_bin_s, int n_bins) const;

  /// Both flip channels disabled (infinite time constants).
  PhysicsParams without_flips() const;
};

/// Detected fluorescence rate of a bright ion at the given power, counts/s.
/// Saturation curve: n0 * x / (1 + x) with x = P / P0.
double saturation_rate(const PhysicsParams& params, double power_uw);

/// Per-sub-bin state flip probabilities.
struct TransitionProbs {
  double bright_to_dark = 0.0;
  double dark_to_bright = 0.0;
};

/// p_bd = 1 - exp(-dt / tau_bd), p_db = 1 - exp(-dt * (P / P_ref) / tau_db_ref).
/// Values are in [0, 1); infinite taus give exactly 0.
TransitionProbs transition_probs(const PhysicsParams& params);

/// One simulated detection window: per-sub-bin photon counts plus the hidden
/// state path that generated them. `true_label` is the state at the start of
/// detection, which is what a classifier must recover.
struct PhotonTrajectory {
  std::vector<int> counts;
  std::vector<StateLabel> hidden_path;
  StateLabel true_label = StateLabel::Dark;
  std::uint64_t params_fingerprint = 0;

  int total() const;
};

/// Draw one trajectory. The hidden state evolves once per sub-bin boundary;
/// within a sub-bin the emission rate is fixed by the state at the start of
/// that bin. Identical (params, initial, seed) always yields identical output.
PhotonTrajectory sample_trajectory(const PhysicsParams& params, StateLabel initial,
                                   std::uint64_t seed);

struct LabeledDataset {
  std::vector<PhotonTrajectory> trajectories;
  double class_balance = 0.5;  // declared bright fraction
  std::uint64_t seed = 0;
  std::uint64_t params_fingerprint = 0;
  int n_sub_bins = 0;
  double sub_bin_duration = 0.0;

  std::size_t size() const { return trajectories.size(); }
  double empirical_bright_fraction() const;
};

/// Generate n labeled trajectories. Each index gets its own derived seed, so
/// the result is bit-identical for any n_threads.
LabeledDataset generate_dataset(const PhysicsParams& params, std::size_t n, double balance,
                                std::uint64_t seed, int n_threads = 1);

/// Sum adjacent groups of `factor` sub-bins. factor must divide the length.
/// The hidden path is dropped (a merged bin has no single state).
PhotonTrajectory rebin(const PhotonTrajectory& traj, int factor);
LabeledDataset rebin(const LabeledDataset& data, int factor);

/// First k sub-bins of every trajectory (prefix truncation).
LabeledDataset prefix(const LabeledDataset& data, int k);

}  // namespace ionread
