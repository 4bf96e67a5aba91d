// Release gate: ten end-to-end checks over the whole pipeline, from the
// calibrated simulator to the fixed-point runtime. Each check prints one
// [PASS]/[FAIL] line with the measured numbers; the exit code is the number
// of failures. Tolerances are pinned here, not configurable.
//
// Every check derives its seeds from kSeed and a fixed per-check index, so a
// rerun reproduces the printed numbers exactly (wall times excluded).

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include "ionread/baselines.hpp"
#include "ionread/bench.hpp"
#include "ionread/fixedpoint.hpp"
#include "ionread/nn.hpp"
#include "ionread/physics.hpp"
#include "ionread/rng.hpp"
#include "ionread/ttl.hpp"
#include "gradcheck_suite.hpp"

using namespace ionread;

namespace {

constexpr std::uint64_t kSeed = 42;

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
  std::printf("[%s] C%d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* f, ...) {
  va_list args;
  va_start(args, f);
  char buf[512];
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Bit-exact row comparison; per_sample_us is wall time and deliberately
// excluded.
bool same_bits(double a, double b) {
  return std::bit_cast<std::uint64_t>(a) == std::bit_cast<std::uint64_t>(b);
}

bool same_report(const ExperimentReport& a, const ExperimentReport& b) {
  if (a.experiment != b.experiment || a.method != b.method ||
      a.physics_fingerprint != b.physics_fingerprint || a.seed != b.seed ||
      a.rows.size() != b.rows.size())
    return false;
  for (std::size_t i = 0; i < a.rows.size(); ++i) {
    const ReportRow& x = a.rows[i];
    const ReportRow& y = b.rows[i];
    if (x.condition != y.condition || !same_bits(x.power_uw, y.power_uw) ||
        x.n_bins != y.n_bins || x.n != y.n || x.correct != y.correct ||
        !same_bits(x.accuracy, y.accuracy) || !same_bits(x.ci_low, y.ci_low) ||
        !same_bits(x.ci_high, y.ci_high))
      return false;
  }
  return true;
}

// ---------------------------------------------------------------------------

// Calibration anchor: the calibrated simulator must put the fitted-threshold
// accuracy at the full 100 x 3 us window inside 99.25% +/- 0.3pp on a fresh
// 5e4-sample evaluation, in under ten minutes end to end.
PhysicsParams check_calibration() {
  const auto t0 = std::chrono::steady_clock::now();
  const CalibrationResult cal = calibrate(CalibrationTarget{}, derive_seed(kSeed, 1));
  const ExperimentReport rep =
      fidelity_curve(Method::Threshold, cal.params, {100}, 50000, derive_seed(kSeed, 11));
  const double acc = rep.rows.at(0).accuracy;
  const double elapsed = seconds_since(t0);
  const bool ok = std::fabs(acc - 0.9925) <= 0.003 && elapsed < 600.0;
  report(1, ok,
         fmt("calibrated threshold accuracy %.5f (target 0.99250 +/- 0.00300, search hit "
             "%.5f), %.0f s (limit 600)",
             acc, cal.achieved_accuracy, elapsed));
  return cal.params;
}

// Method ordering on one shared held-out set: ML beats the threshold, the
// CNN comes within 0.1pp of ML, and all three clear 98.5%.
void check_method_ordering(const PhysicsParams& params) {
  const ExperimentReport table = method_table(params, 50000, derive_seed(kSeed, 2));
  double thr = -1.0, ml = -1.0, cnn = -1.0;
  for (const ReportRow& row : table.rows) {
    if (row.condition == "threshold") thr = row.accuracy;
    if (row.condition == "ml") ml = row.accuracy;
    if (row.condition == "cnn") cnn = row.accuracy;
  }
  const bool ok = ml >= thr && cnn >= ml - 0.001 && thr >= 0.985 && ml >= 0.985 && cnn >= 0.985;
  report(2, ok,
         fmt("threshold %.5f <= ml %.5f, cnn %.5f >= ml - 0.001, all >= 0.985", thr, ml, cnn));
}

// Window-length crossover: the CNN reaches 99% in at most 0.7x the sub-bins
// the threshold needs. The threshold scans the full 40..100 grid; the CNN is
// probed on a coarse grid below the bar, which can only overstate its
// minimum.
void check_min_bins(const PhysicsParams& params) {
  std::vector<int> grid;
  for (int bins = 40; bins <= 100; bins += 5) grid.push_back(bins);
  const ExperimentReport thr_curve =
      fidelity_curve(Method::Threshold, params, grid, 50000, derive_seed(kSeed, 3));
  const ExperimentReport cnn_curve =
      fidelity_curve(Method::Cnn, params, {45, 50}, 50000, derive_seed(kSeed, 3));
  const std::optional<int> thr_bins = min_bins_for(thr_curve, 0.99);
  const std::optional<int> cnn_bins = min_bins_for(cnn_curve, 0.99);
  const bool ok = thr_bins && cnn_bins && *cnn_bins <= 0.7 * *thr_bins;
  report(3, ok,
         fmt("bins for >= 99%%: cnn %s <= 0.7 x threshold %s",
             cnn_bins ? std::to_string(*cnn_bins).c_str() : "none",
             thr_bins ? std::to_string(*thr_bins).c_str() : "none"));
}

// Onboard operating point: the 10-input FCNN reading 5 x 30 us sub-bins at
// the mid laser power holds 99% on 5e4 held-out samples.
void check_onboard_operating_point(const PhysicsParams& onboard) {
  const ExperimentReport rep =
      fidelity_curve(Method::FcnnOnboard, onboard, {5}, 50000, derive_seed(kSeed, 4));
  const double acc = rep.rows.at(0).accuracy;
  report(4, acc >= 0.99, fmt("onboard fcnn, 5 x 30 us, 2.95 uW: accuracy %.5f >= 0.99", acc));
}

// High-power robustness: at the highest swept power the threshold loses
// accuracy going 5 -> 10 sub-bins (state flips dominate the longer window)
// while the network gives up no more than 0.2pp.
void check_high_power_robustness(const PhysicsParams& onboard) {
  const std::vector<double> powers{2.95, 5.90};
  const std::vector<int> bins{5, 10};
  const ExperimentReport thr =
      power_sweep(Method::Threshold, onboard, powers, bins, 50000, derive_seed(kSeed, 5));
  const ExperimentReport fcnn =
      power_sweep(Method::FcnnOnboard, onboard, powers, bins, 50000, derive_seed(kSeed, 5));
  // Rows are power-major: [2] and [3] are the 5.90 uW pair.
  const ReportRow& t5 = thr.rows.at(2);
  const ReportRow& t10 = thr.rows.at(3);
  const ReportRow& f5 = fcnn.rows.at(2);
  const ReportRow& f10 = fcnn.rows.at(3);
  const bool labels_ok = t5.condition == "P=5.90uW bins=5" && t10.condition == "P=5.90uW bins=10";
  const bool ok = labels_ok && t10.accuracy < t5.accuracy && f10.accuracy >= f5.accuracy - 0.002;
  report(5, ok,
         fmt("at 5.90 uW: threshold %.5f -> %.5f (must drop), fcnn %.5f -> %.5f (>= -0.2pp)",
             t5.accuracy, t10.accuracy, f5.accuracy, f10.accuracy));
}

// Posterior oracle: the forward recursion agrees with exhaustive hidden-path
// enumeration to 1e-10 on a thousand random models and count vectors.
void check_posterior_oracle() {
  Rng rng(derive_seed(kSeed, 6));
  double max_delta = 0.0;
  for (int i = 0; i < 1000; ++i) {
    HmmModel model;
    model.lambda_bright = rng.uniform(0.05, 8.0);
    model.lambda_dark = rng.uniform(0.001, 1.0);
    model.p_bright_to_dark = rng.uniform(0.0, 0.2);
    model.p_dark_to_bright = rng.uniform(0.0, 0.2);
    model.prior_bright = rng.uniform(0.1, 0.9);
    model.prior_dark = 1.0 - model.prior_bright;
    const int len = 1 + static_cast<int>(rng.bounded(12));
    std::vector<int> counts(static_cast<std::size_t>(len));
    for (int& c : counts)
      c = rng.bernoulli(0.5) ? rng.poisson(rng.uniform(0.0, 8.0))
                             : static_cast<int>(rng.bounded(21));
    const double fast = posterior_bright(counts, model);
    const double brute = brute_force_posterior_bright(counts, model);
    max_delta = std::max(max_delta, std::fabs(fast - brute));
  }
  report(6, max_delta < 1e-10,
         fmt("forward recursion vs path enumeration: max |delta| %.3g < 1e-10 over 1000 "
             "instances",
             max_delta));
}

// Gradient checks: manual backprop against central finite differences over
// 30 randomized layer configurations.
void check_gradients() {
  const std::vector<gradcheck::ConfigResult> results = gradcheck::run_suite(30);
  bool all_found = true;
  double worst = 0.0;
  for (const gradcheck::ConfigResult& r : results) {
    all_found = all_found && r.batch_found;
    worst = std::max(worst, r.rel_error);
  }
  report(7, all_found && worst < gradcheck::kRelTol,
         fmt("backprop vs finite differences: max relative error %.3g < 1e-4 over %zu configs",
             worst, results.size()));
}

// Quantization fidelity: the Q16.16 engine agrees with the float net on at
// least 99.9% of 1e5 held-out samples, with zero saturation events and an
// interval bound that rules saturation out for counts up to 50.
void check_quantization(const PhysicsParams& onboard) {
  const std::uint64_t seed = derive_seed(kSeed, 8);
  const LabeledDataset train_set =
      generate_dataset(onboard, 400000, 0.5, derive_seed(derive_seed(seed, 1), 0));
  const LabeledDataset eval_set =
      generate_dataset(onboard, 100000, 0.5, derive_seed(derive_seed(seed, 2), 0));
  TrainConfig cfg;
  cfg.standardize = true;
  cfg.total_samples = 8000000;
  cfg.seed = derive_seed(derive_seed(seed, 3), 0);
  const NetworkSpec spec = fcnn_onboard_spec();
  const TrainResult trained = train(spec, train_set, cfg);
  const FixedPointNet qnet = quantize(spec, trained.params, trained.norm);

  long agree = 0, saturations = 0;
  int max_count = 0;
  for (const PhotonTrajectory& traj : eval_set.trajectories) {
    const StateLabel float_label = predict(spec, trained.params, traj.counts, trained.norm);
    const FixedInferResult fx = fixed_infer(qnet, traj.counts);
    agree += fx.label == float_label;
    saturations += fx.saturation_events;
    for (int c : traj.counts) max_count = std::max(max_count, c);
  }
  const double agreement = static_cast<double>(agree) / static_cast<double>(eval_set.size());
  const double bound = activation_abs_bound(qnet, 0, 50);
  const bool ok = agreement >= 0.999 && saturations == 0 && bound < 32768.0 && max_count <= 50;
  report(8, ok,
         fmt("fixed vs float agreement %.5f >= 0.999, saturations %ld, activation bound %.1f < "
             "32768 (counts <= %d)",
             agreement, saturations, bound, max_count));
}

// Timing front end: counts -> TTL edges -> divider/counter recovers every
// trajectory exactly, and the divided clock's sub-bin boundaries stay within
// one 10 ns system tick of the gate edge for a thousand random gate phases.
void check_ttl_roundtrip(const PhysicsParams& onboard) {
  CounterConfig counter;  // 100 MHz / 3000 = 30 us sub-bins, 10 per gate
  counter.validate();
  const std::uint64_t seed = derive_seed(kSeed, 9);
  long mismatches = 0;
  std::int64_t max_offset = 0;
  Rng phase_rng(derive_seed(seed, 0xb0));
  for (int i = 0; i < 1000; ++i) {
    const StateLabel initial = i % 2 == 0 ? StateLabel::Bright : StateLabel::Dark;
    const PhotonTrajectory traj =
        sample_trajectory(onboard, initial, derive_seed(seed, static_cast<std::uint64_t>(i)));
    const auto gate_start = static_cast<std::int64_t>(phase_rng.bounded(1000000));
    const TtlEdgeStream stream =
        simulate_ttl(traj, onboard.sub_bin_duration, counter,
                     derive_seed(seed ^ 0x74746cull, static_cast<std::uint64_t>(i)), gate_start);
    mismatches += divider_counter(stream, counter) != traj.counts;
    const std::int64_t t0 =
        (gate_start + counter.tick_ns() - 1) / counter.tick_ns() * counter.tick_ns();
    max_offset = std::max(max_offset, t0 - gate_start);
  }
  const bool ok = mismatches == 0 && max_offset <= counter.tick_ns();
  report(9, ok,
         fmt("round-trip mismatches %ld of 1000, max boundary offset %lld ns <= %lld", mismatches,
             static_cast<long long>(max_offset), static_cast<long long>(counter.tick_ns())));
}

// Determinism: rerunning each experiment type with the same seed reproduces
// every reported number bit for bit (wall times excluded by design).
void check_determinism(const PhysicsParams& params, const PhysicsParams& onboard) {
  const std::uint64_t seed = derive_seed(kSeed, 10);
  bool ok = true;

  const ExperimentReport thr_a =
      fidelity_curve(Method::Threshold, params, {50, 100}, 20000, seed);
  const ExperimentReport thr_b =
      fidelity_curve(Method::Threshold, params, {50, 100}, 20000, seed);
  ok = ok && same_report(thr_a, thr_b);

  const ExperimentReport ml_a = fidelity_curve(Method::MaxLikelihood, params, {30}, 10000, seed);
  const ExperimentReport ml_b = fidelity_curve(Method::MaxLikelihood, params, {30}, 10000, seed);
  ok = ok && same_report(ml_a, ml_b);

  const ExperimentReport net_a =
      power_sweep(Method::FcnnOnboard, onboard, {2.95}, {5}, 5000, seed);
  const ExperimentReport net_b =
      power_sweep(Method::FcnnOnboard, onboard, {2.95}, {5}, 5000, seed);
  ok = ok && same_report(net_a, net_b);

  const ExperimentReport tab_a = method_table(onboard, 2000, seed);
  const ExperimentReport tab_b = method_table(onboard, 2000, seed);
  ok = ok && same_report(tab_a, tab_b);

  report(10, ok,
         "reruns of fidelity curves, power sweep and method table are bit-identical "
         "(timing fields excluded)");
}

}  // namespace

int main() {
  const auto t0 = std::chrono::steady_clock::now();
  std::printf("acceptance suite, master seed %llu\n", static_cast<unsigned long long>(kSeed));

  const PhysicsParams calibrated = check_calibration();
  const PhysicsParams onboard = calibrated.rebinned(30e-6, 10);
  check_method_ordering(calibrated);
  check_min_bins(calibrated);
  check_onboard_operating_point(onboard);
  check_high_power_robustness(onboard);
  check_posterior_oracle();
  check_gradients();
  check_quantization(onboard);
  check_ttl_roundtrip(onboard);
  check_determinism(calibrated, onboard);

  std::printf("%d of 10 criteria passed in %.0f s\n", 10 - g_failures, seconds_since(t0));
  return g_failures;
}
