#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "ionread/bench.hpp"
#include "ionread/physics.hpp"

using namespace ionread;

namespace {

// 30 us x 10 sub-bins: the cheap operating point for exercising the
// training-backed paths.
PhysicsParams onboard_params() { return PhysicsParams{}.rebinned(30e-6, 10); }

std::vector<long> corrects(const ExperimentReport& r) {
  std::vector<long> out;
  for (const ReportRow& row : r.rows) out.push_back(row.correct);
  return out;
}

void check_row_shape(const ExperimentReport& r, long n) {
  for (const ReportRow& row : r.rows) {
    CHECK(row.n == n);
    CHECK(row.correct >= 0);
    CHECK(row.correct <= row.n);
    CHECK(row.accuracy == doctest::Approx(static_cast<double>(row.correct) / n).epsilon(1e-15));
    CHECK(row.ci_low <= row.accuracy);
    CHECK(row.ci_high >= row.accuracy);
    CHECK(row.ci_low >= 0.0);
    CHECK(row.ci_high <= 1.0);
  }
}

}  // namespace

TEST_CASE("wilson interval matches an independent implementation") {
  // Frozen against a separate evaluation of the score-interval formula.
  auto ci = wilson_interval(50, 100);
  CHECK(ci.low == doctest::Approx(0.4038315303659956).epsilon(1e-12));
  CHECK(ci.high == doctest::Approx(0.5961684696340044).epsilon(1e-12));

  ci = wilson_interval(0, 10);
  CHECK(ci.low == 0.0);
  CHECK(ci.high == doctest::Approx(0.2775327998628892).epsilon(1e-12));

  ci = wilson_interval(10, 10);
  CHECK(ci.low == doctest::Approx(0.7224672001371107).epsilon(1e-12));
  CHECK(ci.high <= 1.0);

  ci = wilson_interval(99248, 100000);
  CHECK(ci.low == doctest::Approx(0.9919253097758142).epsilon(1e-12));
  CHECK(ci.high == doctest::Approx(0.9929968548448161).epsilon(1e-12));
}

TEST_CASE("wilson interval symmetry, containment and domain errors") {
  for (long n : {1L, 7L, 100L, 5000L}) {
    for (long c = 0; c <= n; c += std::max(1L, n / 7)) {
      const auto ci = wilson_interval(c, n);
      const auto mirrored = wilson_interval(n - c, n);
      CHECK(ci.low == doctest::Approx(1.0 - mirrored.high).epsilon(1e-12));
      const double phat = static_cast<double>(c) / static_cast<double>(n);
      CHECK(ci.low <= phat);
      CHECK(ci.high >= phat);
    }
  }
  CHECK_THROWS_AS(wilson_interval(0, 0), std::invalid_argument);
  CHECK_THROWS_AS(wilson_interval(-1, 10), std::invalid_argument);
  CHECK_THROWS_AS(wilson_interval(11, 10), std::invalid_argument);
}

TEST_CASE("wilson interval width halves when n quadruples") {
  for (double p : {0.5, 0.9, 0.99}) {
    const long n = 1000;
    const auto small = wilson_interval(std::lround(p * n), n);
    const auto big = wilson_interval(std::lround(p * 4 * n), 4 * n);
    const double ratio = (big.high - big.low) / (small.high - small.low);
    CHECK(ratio > 0.4);
    CHECK(ratio < 0.6);
  }
}

TEST_CASE("calibrate accepts the default operating point and is deterministic") {
  const CalibrationTarget target;  // 0.99248 +/- 0.003
  const auto a = calibrate(target, 77, PhysicsParams{}, 20000, 20000);
  const auto b = calibrate(target, 77, PhysicsParams{}, 20000, 20000);
  CHECK(a.params.fingerprint() == PhysicsParams{}.fingerprint());
  CHECK(a.achieved_accuracy == b.achieved_accuracy);
  CHECK(std::fabs(a.achieved_accuracy - target.accuracy) <= target.tolerance);
  CHECK(a.achieved_accuracy > 0.98);
  CHECK(a.achieved_accuracy < 1.0);
}

TEST_CASE("calibrate on a perfectly separable configuration hits accuracy 1") {
  PhysicsParams start = PhysicsParams{}.without_flips();
  start.dark_rate = 0.0;  // dark trajectories emit nothing at all
  const CalibrationTarget target{1.0, 0.0};
  const auto result = calibrate(target, 5, start, 5000, 5000);
  CHECK(result.achieved_accuracy == 1.0);
  CHECK(result.params.fingerprint() == start.fingerprint());
}

TEST_CASE("calibrate reports the best point when the target is unreachable") {
  // No balanced dataset yields 12.3456% threshold accuracy, so the search
  // must exhaust and surface where it ended up.
  const CalibrationTarget target{0.123456, 1e-12};
  try {
    calibrate(target, 9, PhysicsParams{}, 2000, 2000);
    FAIL("expected CalibrationError");
  } catch (const CalibrationError& e) {
    CHECK(std::string(e.what()).find("calibrate") != std::string::npos);
    CHECK(e.best_accuracy > 0.0);
    // The descent must have moved off the start toward lower accuracy.
    CHECK(e.best_accuracy < 0.99);
    CHECK_NOTHROW(e.best_params.validate());
  }
}

TEST_CASE("calibrate target validation") {
  CHECK_THROWS_AS(calibrate(CalibrationTarget{0.0, 0.01}, 1, PhysicsParams{}, 100, 100),
                  std::invalid_argument);
  CHECK_THROWS_AS(calibrate(CalibrationTarget{1.5, 0.01}, 1, PhysicsParams{}, 100, 100),
                  std::invalid_argument);
  CHECK_THROWS_AS(calibrate(CalibrationTarget{0.99, -0.1}, 1, PhysicsParams{}, 100, 100),
                  std::invalid_argument);
  CHECK_THROWS_AS(calibrate(CalibrationTarget{}, 1, PhysicsParams{}, 0, 100),
                  std::invalid_argument);
}

TEST_CASE("fidelity curve: threshold accuracy grows with the window") {
  const PhysicsParams params;
  const auto report = fidelity_curve(Method::Threshold, params, {1, 40, 100}, 4000, 21);
  REQUIRE(report.rows.size() == 3);
  CHECK(report.experiment == "fidelity_curve");
  CHECK(report.method == "threshold");
  CHECK(report.physics_fingerprint == params.fingerprint());
  CHECK(report.seed == 21);
  check_row_shape(report, 4000);
  CHECK(report.rows[0].condition == "bins=1");
  CHECK(report.rows[2].condition == "bins=100");
  CHECK(report.rows[0].n_bins == 1);
  CHECK(report.rows[2].n_bins == 100);
  // A one-bin prefix carries almost no light; the full window is the anchor.
  CHECK(report.rows[0].accuracy < report.rows[2].accuracy);
  CHECK(report.rows[2].accuracy > 0.98);
  CHECK(report.rows[2].accuracy < 1.0);

  const auto rerun = fidelity_curve(Method::Threshold, params, {1, 40, 100}, 4000, 21);
  CHECK(corrects(rerun) == corrects(report));
  const auto threaded = fidelity_curve(Method::Threshold, params, {1, 40, 100}, 4000, 21, 3);
  CHECK(corrects(threaded) == corrects(report));
}

TEST_CASE("fidelity curve: ML tracks the forward model and beats the threshold") {
  const PhysicsParams params;
  const auto ml = fidelity_curve(Method::MaxLikelihood, params, {1, 100}, 10000, 33);
  const auto thr = fidelity_curve(Method::Threshold, params, {100}, 10000, 33);
  REQUIRE(ml.rows.size() == 2);
  check_row_shape(ml, 10000);
  CHECK(ml.rows[0].accuracy > 0.5);
  CHECK(ml.rows[0].accuracy < ml.rows[1].accuracy);
  // Same held-out stream (same seed and role), so this is a paired
  // comparison: the exact-model likelihood cannot lose to an integer cut.
  CHECK(ml.rows[1].accuracy >= thr.rows[0].accuracy);
}

TEST_CASE("fidelity curve: trained networks on the short-window operating point") {
  const auto report = fidelity_curve(Method::FcnnOnboard, onboard_params(), {5, 10}, 4000, 55);
  REQUIRE(report.rows.size() == 2);
  check_row_shape(report, 4000);
  CHECK(report.rows[0].accuracy > 0.97);
  CHECK(report.rows[1].accuracy > 0.97);

  const auto rerun = fidelity_curve(Method::FcnnOnboard, onboard_params(), {5, 10}, 4000, 55);
  CHECK(corrects(rerun) == corrects(report));
  const auto threaded = fidelity_curve(Method::FcnnOnboard, onboard_params(), {5, 10}, 4000, 55, 3);
  CHECK(corrects(threaded) == corrects(report));
}

TEST_CASE("fidelity curve: CNN pads short windows up to the pooling granularity") {
  // 5 sub-bins is not divisible by 4; the curve must zero-pad to 8 and still
  // come out of training an accurate classifier.
  const auto report = fidelity_curve(Method::Cnn, onboard_params(), {5}, 1000, 71);
  REQUIRE(report.rows.size() == 1);
  check_row_shape(report, 1000);
  CHECK(report.rows[0].n_bins == 5);
  CHECK(report.rows[0].accuracy > 0.95);
}

TEST_CASE("fidelity curve input validation") {
  const PhysicsParams params;
  CHECK_THROWS_AS(fidelity_curve(Method::Threshold, params, {}, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(fidelity_curve(Method::Threshold, params, {0}, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(fidelity_curve(Method::Threshold, params, {101}, 100, 1), std::invalid_argument);
  CHECK_THROWS_AS(fidelity_curve(Method::Threshold, params, {100}, 0, 1), std::invalid_argument);
  // The onboard network has a fixed 10-wide input.
  CHECK_THROWS_AS(fidelity_curve(Method::FcnnOnboard, params, {12}, 100, 1),
                  std::invalid_argument);
}

TEST_CASE("power sweep: rows per (power, bins), refit per condition") {
  const auto report = power_sweep(Method::Threshold, onboard_params(), {2.95}, {5, 10}, 4000, 13);
  REQUIRE(report.rows.size() == 2);
  check_row_shape(report, 4000);
  CHECK(report.rows[0].condition == "P=2.95uW bins=5");
  CHECK(report.rows[1].condition == "P=2.95uW bins=10");
  CHECK(report.rows[0].power_uw == 2.95);
  CHECK(report.rows[1].n_bins == 10);
  CHECK(report.rows[0].accuracy > 0.9);
  CHECK(report.rows[1].accuracy > 0.9);
}

TEST_CASE("power sweep: vanishing laser power carries no state information") {
  const auto report = power_sweep(Method::Threshold, PhysicsParams{}, {1e-6}, {100}, 2000, 17);
  REQUIRE(report.rows.size() == 1);
  CHECK(std::fabs(report.rows[0].accuracy - 0.5) < 0.05);
}

TEST_CASE("power sweep: trained network is deterministic across reruns and threads") {
  const auto report = power_sweep(Method::FcnnOnboard, onboard_params(), {2.95}, {10}, 2000, 19);
  REQUIRE(report.rows.size() == 1);
  CHECK(report.rows[0].accuracy > 0.97);
  const auto rerun = power_sweep(Method::FcnnOnboard, onboard_params(), {2.95}, {10}, 2000, 19);
  CHECK(corrects(rerun) == corrects(report));
  const auto threaded =
      power_sweep(Method::FcnnOnboard, onboard_params(), {2.95}, {10}, 2000, 19, 3);
  CHECK(corrects(threaded) == corrects(report));
}

TEST_CASE("power sweep input validation") {
  CHECK_THROWS_AS(power_sweep(Method::Threshold, PhysicsParams{}, {}, {100}, 100, 1),
                  std::invalid_argument);
  CHECK_THROWS_AS(power_sweep(Method::Threshold, PhysicsParams{}, {2.95}, {}, 100, 1),
                  std::invalid_argument);
}

TEST_CASE("method table: every classifier on one shared held-out set") {
  const auto report = method_table(onboard_params(), 5000, 23);
  REQUIRE(report.rows.size() == 5);
  CHECK(report.experiment == "method_table");
  CHECK(report.method == "all");
  check_row_shape(report, 5000);
  CHECK(report.rows[0].condition == "threshold");
  CHECK(report.rows[1].condition == "ml");
  CHECK(report.rows[2].condition == "logistic");
  CHECK(report.rows[3].condition == "fcnn_wide");
  CHECK(report.rows[4].condition == "cnn");
  for (const ReportRow& row : report.rows) {
    CHECK(row.accuracy > 0.97);
    CHECK(row.per_sample_us > 0.0);
  }
  // Paired on the same trajectories, the exact-model likelihood does not
  // lose to the integer cut (slack absorbs eval quantization only).
  CHECK(report.rows[0].accuracy <= report.rows[1].accuracy + 0.001);

  const std::string table = render_table(report);
  CHECK(table.find("us/sample") != std::string::npos);
  CHECK(table.find("fcnn_wide") != std::string::npos);
  CHECK(table.find("experiment=method_table") != std::string::npos);
}

TEST_CASE("csv export round-trips the report numbers") {
  ExperimentReport report{"fidelity_curve", "threshold", 0xabcdef0123456789ull, 42, {}};
  ReportRow row;
  row.condition = "bins=100";
  row.power_uw = 2.95;
  row.n_bins = 100;
  row.n = 100;
  row.correct = 50;
  row.accuracy = 0.5;
  const auto ci = wilson_interval(50, 100);
  row.ci_low = ci.low;
  row.ci_high = ci.high;
  report.rows.push_back(row);

  const std::string path = "bench_csv_roundtrip.csv";
  write_csv(report, path);
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header, line;
  std::getline(in, header);
  CHECK(header == "condition,n,correct,accuracy,ci_low,ci_high");
  std::getline(in, line);
  std::stringstream ss(line);
  std::string cond, n_s, correct_s, acc_s, lo_s, hi_s;
  std::getline(ss, cond, ',');
  std::getline(ss, n_s, ',');
  std::getline(ss, correct_s, ',');
  std::getline(ss, acc_s, ',');
  std::getline(ss, lo_s, ',');
  std::getline(ss, hi_s, ',');
  CHECK(cond == "bins=100");
  CHECK(std::stol(n_s) == 100);
  CHECK(std::stol(correct_s) == 50);
  // %.17g survives the double round trip bit-exactly.
  CHECK(std::stod(acc_s) == 0.5);
  CHECK(std::stod(lo_s) == ci.low);
  CHECK(std::stod(hi_s) == ci.high);
  std::remove(path.c_str());

  CHECK_THROWS_AS(write_csv(report, "/nonexistent-dir/report.csv"), std::runtime_error);
}

TEST_CASE("report filename encodes experiment, method, seed and fingerprint") {
  ExperimentReport report{"power_sweep", "fcnn_onboard", 0x00000000000000ffull, 7, {}};
  CHECK(report_filename(report, "csv") == "power_sweep_fcnn_onboard_seed7_fp00000000000000ff.csv");
}

TEST_CASE("min_bins_for picks the smallest qualifying bin count") {
  ExperimentReport report;
  auto add = [&](int bins, double acc) {
    ReportRow row;
    row.n_bins = bins;
    row.accuracy = acc;
    row.n = 100;
    row.correct = static_cast<long>(acc * 100);
    report.rows.push_back(row);
  };
  add(100, 0.995);
  add(80, 0.992);
  add(60, 0.987);
  CHECK(min_bins_for(report, 0.99) == 80);
  CHECK(min_bins_for(report, 0.994) == 100);
  CHECK(!min_bins_for(report, 0.999).has_value());
  ExperimentReport empty;
  CHECK(!min_bins_for(empty, 0.5).has_value());
}
