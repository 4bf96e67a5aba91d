#include "ionread/physics.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>

#include "ionread/rng.hpp"

namespace ionread {

namespace {

constexpr std::uint64_t kLabelTag = 0x6c6162656c736565ull;  // dataset label stream
constexpr std::uint64_t kTrajTag = 0x7472616a73656564ull;   // dataset trajectory stream

std::uint64_t hash_double(std::uint64_t h, double v) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(v));
  std::memcpy(&bits, &v, sizeof(bits));
  return mix64(h ^ bits);
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("PhysicsParams: ") + what);
}

}  // namespace

const char* to_string(StateLabel s) { return s == StateLabel::Bright ? "bright" : "dark"; }

StateLabel state_from_string(std::string_view text) {
  if (text == "bright") return StateLabel::Bright;
  if (text == "dark") return StateLabel::Dark;
  throw std::invalid_argument("unknown state label: " + std::string(text));
}

void PhysicsParams::validate() const {
  require(std::isfinite(laser_power_uw) && laser_power_uw >= 0.0, "laser power must be >= 0");
  require(std::isfinite(p0_saturation_uw) && p0_saturation_uw > 0.0,
          "saturation power must be positive");
  require(std::isfinite(n0_saturation_rate) && n0_saturation_rate > 0.0,
          "saturation rate must be positive");
  require(std::isfinite(dark_rate) && dark_rate >= 0.0, "dark rate must be >= 0");
  require(bright_decay_tau > 0.0, "bright decay tau must be positive");
  require(dark_pump_tau_ref > 0.0, "dark pump tau must be positive");
  require(std::isfinite(reference_power_uw) && reference_power_uw > 0.0,
          "reference power must be positive");
  require(std::isfinite(sub_bin_duration) && sub_bin_duration > 0.0,
          "sub-bin duration must be positive");
  require(n_sub_bins >= 1, "need at least one sub-bin");
}

std::uint64_t PhysicsParams::fingerprint() const {
  std::uint64_t h = 0x696f6e7265616421ull;
  h = hash_double(h, laser_power_uw);
  h = hash_double(h, p0_saturation_uw);
  h = hash_double(h, n0_saturation_rate);
  h = hash_double(h, dark_rate);
  h = hash_double(h, bright_decay_tau);
  h = hash_double(h, dark_pump_tau_ref);
  h = hash_double(h, reference_power_uw);
  h = hash_double(h, sub_bin_duration);
  h = mix64(h ^ static_cast<std::uint64_t>(n_sub_bins));
  return h;
}

PhysicsParams PhysicsParams::at_power(double power_uw) const {
  PhysicsParams p = *this;
  require(std::isfinite(power_uw) && power_uw > 0.0, "at_power: power must be positive");
  // Flip rate scales with power, so the time constant scales inversely.
  p.bright_decay_tau = bright_decay_tau * (laser_power_uw / power_uw);
  p.laser_power_uw = power_uw;
  return p;
}

PhysicsParams PhysicsParams::rebinned(double sub_bin_s, int n_bins) const {
  PhysicsParams p = *this;
  p.sub_bin_duration = sub_bin_s;
  p.n_sub_bins = n_bins;
  p.validate();
  return p;
}

PhysicsParams PhysicsParams::without_flips() const {
  PhysicsParams p = *this;
  p.bright_decay_tau = std::numeric_limits<double>::infinity();
  p.dark_pump_tau_ref = std::numeric_limits<double>::infinity();
  return p;
}

double saturation_rate(const PhysicsParams& params, double power_uw) {
  if (!(power_uw >= 0.0) || !std::isfinite(power_uw))
    throw std::invalid_argument("saturation_rate: power must be finite and >= 0");
  const double x = power_uw / params.p0_saturation_uw;
  return params.n0_saturation_rate * x / (1.0 + x);
}

TransitionProbs transition_probs(const PhysicsParams& params) {
  params.validate();
  TransitionProbs t;
  t.bright_to_dark = -std::expm1(-params.sub_bin_duration / params.bright_decay_tau);
  const double pump_rate =
      (params.laser_power_uw / params.reference_power_uw) / params.dark_pump_tau_ref;
  t.dark_to_bright = -std::expm1(-params.sub_bin_duration * pump_rate);
  return t;
}

int PhotonTrajectory::total() const {
  int sum = 0;
  for (int c : counts) sum += c;
  return sum;
}

PhotonTrajectory sample_trajectory(const PhysicsParams& params, StateLabel initial,
                                   std::uint64_t seed) {
  params.validate();
  const TransitionProbs flip = transition_probs(params);
  const double lambda_bright =
      (saturation_rate(params, params.laser_power_uw) + params.dark_rate) *
      params.sub_bin_duration;
  const double lambda_dark = params.dark_rate * params.sub_bin_duration;
  const double exp_bright = std::exp(-lambda_bright);
  const double exp_dark = std::exp(-lambda_dark);

  PhotonTrajectory traj;
  traj.true_label = initial;
  traj.params_fingerprint = params.fingerprint();
  traj.counts.resize(params.n_sub_bins);
  traj.hidden_path.resize(params.n_sub_bins);

  Rng rng(seed);
  StateLabel state = initial;
  for (int i = 0; i < params.n_sub_bins; ++i) {
    traj.hidden_path[i] = state;
    if (state == StateLabel::Bright) {
      traj.counts[i] = rng.poisson_pre(lambda_bright, exp_bright);
    } else {
      traj.counts[i] = rng.poisson_pre(lambda_dark, exp_dark);
    }
    if (i + 1 < params.n_sub_bins) {
      if (state == StateLabel::Bright) {
        if (rng.bernoulli(flip.bright_to_dark)) state = StateLabel::Dark;
      } else {
        if (rng.bernoulli(flip.dark_to_bright)) state = StateLabel::Bright;
      }
    }
  }
  return traj;
}

double LabeledDataset::empirical_bright_fraction() const {
  if (trajectories.empty()) return 0.0;
  std::size_t bright = 0;
  for (const auto& t : trajectories)
    if (t.true_label == StateLabel::Bright) ++bright;
  return static_cast<double>(bright) / static_cast<double>(trajectories.size());
}

LabeledDataset generate_dataset(const PhysicsParams& params, std::size_t n, double balance,
                                std::uint64_t seed, int n_threads) {
  params.validate();
  if (n == 0) throw std::invalid_argument("generate_dataset: n must be positive");
  if (!(balance >= 0.0 && balance <= 1.0))
    throw std::invalid_argument("generate_dataset: balance must be in [0, 1]");
  if (n_threads < 1) throw std::invalid_argument("generate_dataset: n_threads must be >= 1");

  LabeledDataset ds;
  ds.class_balance = balance;
  ds.seed = seed;
  ds.params_fingerprint = params.fingerprint();
  ds.n_sub_bins = params.n_sub_bins;
  ds.sub_bin_duration = params.sub_bin_duration;
  ds.trajectories.resize(n);

  // Every index draws from its own derived stream, so the split into worker
  // ranges cannot affect the generated values.
  auto fill_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i) {
      Rng label_rng(derive_seed(seed ^ kLabelTag, i));
      const StateLabel label =
          label_rng.bernoulli(balance) ? StateLabel::Bright : StateLabel::Dark;
      ds.trajectories[i] = sample_trajectory(params, label, derive_seed(seed ^ kTrajTag, i));
    }
  };

  const std::size_t workers = std::min<std::size_t>(n_threads, n);
  if (workers <= 1) {
    fill_range(0, n);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    const std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(fill_range, lo, hi);
    }
    for (auto& t : pool) t.join();
  }
  return ds;
}

PhotonTrajectory rebin(const PhotonTrajectory& traj, int factor) {
  if (factor < 1) throw std::invalid_argument("rebin: factor must be >= 1");
  const std::size_t n = traj.counts.size();
  if (n % static_cast<std::size_t>(factor) != 0)
    throw std::invalid_argument("rebin: factor " + std::to_string(factor) +
                                " does not divide trajectory length " + std::to_string(n));
  PhotonTrajectory out;
  out.true_label = traj.true_label;
  out.params_fingerprint = traj.params_fingerprint;
  out.counts.resize(n / factor);
  for (std::size_t i = 0; i < out.counts.size(); ++i) {
    int sum = 0;
    for (int j = 0; j < factor; ++j) sum += traj.counts[i * factor + j];
    out.counts[i] = sum;
  }
  return out;
}

LabeledDataset rebin(const LabeledDataset& data, int factor) {
  LabeledDataset out;
  out.class_balance = data.class_balance;
  out.seed = data.seed;
  out.params_fingerprint = data.params_fingerprint;
  out.n_sub_bins = data.n_sub_bins / factor;
  out.sub_bin_duration = data.sub_bin_duration * factor;
  out.trajectories.reserve(data.size());
  for (const auto& t : data.trajectories) out.trajectories.push_back(rebin(t, factor));
  return out;
}

LabeledDataset prefix(const LabeledDataset& data, int k) {
  if (k < 1 || k > data.n_sub_bins)
    throw std::invalid_argument("prefix: k must be in [1, n_sub_bins]");
  LabeledDataset out;
  out.class_balance = data.class_balance;
  out.seed = data.seed;
  out.params_fingerprint = data.params_fingerprint;
  out.n_sub_bins = k;
  out.sub_bin_duration = data.sub_bin_duration;
  out.trajectories.reserve(data.size());
  for (const auto& t : data.trajectories) {
    PhotonTrajectory p;
    p.true_label = t.true_label;
    p.params_fingerprint = t.params_fingerprint;
    p.counts.assign(t.counts.begin(), t.counts.begin() + k);
    if (!t.hidden_path.empty())
      p.hidden_path.assign(t.hidden_path.begin(), t.hidden_path.begin() + k);
    out.trajectories.push_back(std::move(p));
  }
  return out;
}

}  // namespace ionread
