#include "ionread/bench.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <fstream>
#include <string>
#include <utility>
#include <vector>

#include "ionread/baselines.hpp"
#include "ionread/nn.hpp"
#include "ionread/rng.hpp"

namespace ionread {
namespace {

constexpr double kWilsonZ = 1.959963984540054;  // two-sided 95%

// Training sets hold this multiple of the evaluation size (2e5 train against
// the standard 5e4 held-out set).
constexpr long kTrainPerEval = 4;

// Dataset roles under one experiment seed. Train, eval and trainer streams
// derive from distinct tags, so no held-out trajectory can share a stream
// with anything a fit ever saw.
constexpr std::uint64_t kTrainRole = 1;
constexpr std::uint64_t kEvalRole = 2;
constexpr std::uint64_t kFitRole = 3;

std::uint64_t role_seed(std::uint64_t seed, std::uint64_t role, std::uint64_t index) {
  return derive_seed(derive_seed(seed, role), index);
}

std::string strprintf(const char* format, ...) {
  va_list args;
  va_start(args, format);
  va_list copy;
  va_copy(copy, args);
  const int len = std::vsnprintf(nullptr, 0, format, args);
  va_end(args);
  std::string out(static_cast<std::size_t>(len), '\0');
  std::vsnprintf(out.data(), out.size() + 1, format, copy);
  va_end(copy);
  return out;
}

// Budgets frozen after a sweep against the exact-model ML ceiling: the CNN
// needs ~5e5 presentations with input standardization to land within 0.1 pp
// of ML on held-out data; the dense nets are cheap enough to run longer.
TrainConfig train_config(Method method, std::uint64_t seed, int n_threads) {
  TrainConfig cfg;
  cfg.standardize = true;
  cfg.seed = seed;
  cfg.n_threads = n_threads;
  // Dense nets are cheap per presentation, so they get a budget deep enough
  // to track the model-optimal accuracy on the hardest condition (full
  // window at high power); the CNN budget is bounded by wall-clock cost.
  cfg.total_samples = method == Method::Cnn ? 500000 : 8000000;
  return cfg;
}

// Input width the network actually reads for a k-bin window. The CNN pools
// twice, so its input is zero-padded up to a multiple of 4; the onboard
// network has a fixed 10-wide input.
int feed_width(Method method, int k) {
  switch (method) {
    case Method::Cnn:
      return std::max(4, (k + 3) / 4 * 4);
    case Method::FcnnOnboard:
      if (k > 10) throw std::invalid_argument("bench: onboard network reads at most 10 sub-bins");
      return 10;
    default:
      return k;
  }
}

NetworkSpec spec_for(Method method, int width) {
  switch (method) {
    case Method::Cnn:
      return cnn_spec(width);
    case Method::FcnnOnboard:
      return fcnn_onboard_spec();
    case Method::FcnnWide:
      return fcnn_wide_spec(width);
    case Method::Logistic:
      return logistic_spec(width);
    default:
      throw std::invalid_argument("bench: not a trainable method");
  }
}

LabeledDataset shaped(const LabeledDataset& data, int k, int width) {
  LabeledDataset out = prefix(data, k);
  if (width != k) out = pad_dataset(out, width);
  return out;
}

struct TrainedNet {
  NetworkSpec spec;
  Params params;
  InputNorm norm;
  int width = 0;
};

TrainedNet fit_net(Method method, const LabeledDataset& train_set, int k, std::uint64_t cfg_seed,
                   int n_threads) {
  TrainedNet net;
  net.width = feed_width(method, k);
  net.spec = spec_for(method, net.width);
  TrainResult result =
      train(net.spec, shaped(train_set, k, net.width), train_config(method, cfg_seed, n_threads));
  net.params = std::move(result.params);
  net.norm = result.norm;
  return net;
}

struct EvalOutcome {
  long correct = 0;
  double per_sample_us = 0.0;
};

template <typename Classify>
EvalOutcome timed_eval(const LabeledDataset& eval_set, Classify&& classify) {
  EvalOutcome out;
  const auto t0 = std::chrono::steady_clock::now();
  for (const PhotonTrajectory& traj : eval_set.trajectories)
    out.correct += classify(traj.counts) == traj.true_label;
  const auto t1 = std::chrono::steady_clock::now();
  out.per_sample_us = std::chrono::duration<double, std::micro>(t1 - t0).count() /
                      static_cast<double>(eval_set.size());
  return out;
}

EvalOutcome eval_threshold(const ThresholdModel& model, const LabeledDataset& eval_set) {
  return timed_eval(eval_set,
                    [&](const std::vector<int>& counts) { return threshold_classify(counts, model); });
}

EvalOutcome eval_ml(const HmmModel& model, const LabeledDataset& eval_set) {
  return timed_eval(eval_set,
                    [&](const std::vector<int>& counts) { return ml_classify(counts, model).label; });
}

EvalOutcome eval_net(const TrainedNet& net, const LabeledDataset& eval_set) {
  return timed_eval(eval_set, [&](const std::vector<int>& counts) {
    return predict(net.spec, net.params, counts, net.norm);
  });
}

ReportRow make_row(std::string condition, double power_uw, int n_bins, long n,
                   const EvalOutcome& out) {
  ReportRow row;
  row.condition = std::move(condition);
  row.power_uw = power_uw;
  row.n_bins = n_bins;
  row.n = n;
  row.correct = out.correct;
  row.accuracy = static_cast<double>(out.correct) / static_cast<double>(n);
  const WilsonInterval ci = wilson_interval(out.correct, n);
  row.ci_low = ci.low;
  row.ci_high = ci.high;
  row.per_sample_us = out.per_sample_us;
  return row;
}

void check_common(const PhysicsParams& params, const std::vector<int>& bins_list, long n_samples) {
  params.validate();
  if (n_samples < 1) throw std::invalid_argument("bench: n_samples must be positive");
  if (bins_list.empty()) throw std::invalid_argument("bench: bins_list is empty");
  for (int k : bins_list)
    if (k < 1 || k > params.n_sub_bins)
      throw std::invalid_argument("bench: bin count outside the detection window");
}

}  // namespace

CalibrationError::CalibrationError(const std::string& what, const PhysicsParams& best,
                                   double best_accuracy_)
    : std::runtime_error(what), best_params(best), best_accuracy(best_accuracy_) {}

void CalibrationTarget::validate() const {
  if (!(accuracy > 0.0) || !(accuracy <= 1.0))
    throw std::invalid_argument("CalibrationTarget: accuracy must be in (0, 1]");
  if (!(tolerance >= 0.0))
    throw std::invalid_argument("CalibrationTarget: tolerance must be non-negative");
}

CalibrationResult calibrate(const CalibrationTarget& target, std::uint64_t seed,
                            const PhysicsParams& start, long n_train, long n_eval) {
  target.validate();
  start.validate();
  if (n_train < 1 || n_eval < 1)
    throw std::invalid_argument("calibrate: dataset sizes must be positive");

  // Probe seeds are fixed once, so the objective is a deterministic function
  // of the candidate point alone.
  const std::uint64_t train_seed = role_seed(seed, kTrainRole, 0);
  const std::uint64_t eval_seed = role_seed(seed, kEvalRole, 0);
  auto objective = [&](const PhysicsParams& candidate) {
    const LabeledDataset fit_set = generate_dataset(candidate, n_train, 0.5, train_seed);
    const LabeledDataset probe_set = generate_dataset(candidate, n_eval, 0.5, eval_seed);
    const ThresholdModel model = fit_threshold(fit_set);
    long correct = 0;
    for (const PhotonTrajectory& traj : probe_set.trajectories)
      correct += threshold_classify(traj.counts, model) == traj.true_label;
    return static_cast<double>(correct) / static_cast<double>(n_eval);
  };
  auto miss = [&](double accuracy) { return std::fabs(accuracy - target.accuracy); };

  PhysicsParams current = start;
  double current_acc = objective(current);
  if (miss(current_acc) <= target.tolerance) return {current, current_acc};

  // Coordinate descent over the three noise constants on a log grid of
  // factors, keeping any candidate that shrinks the miss.
  constexpr std::array<double, 4> kFactors{0.5, 0.8, 1.25, 2.0};
  constexpr int kRounds = 8;
  for (int round = 0; round < kRounds; ++round) {
    bool improved = false;
    for (int coord = 0; coord < 3; ++coord) {
      for (double factor : kFactors) {
        PhysicsParams candidate = current;
        double& field = coord == 0   ? candidate.dark_rate
                        : coord == 1 ? candidate.bright_decay_tau
                                     : candidate.dark_pump_tau_ref;
        field *= factor;
        try {
          candidate.validate();
        } catch (const std::invalid_argument&) {
          continue;
        }
        const double accuracy = objective(candidate);
        if (miss(accuracy) < miss(current_acc)) {
          current = candidate;
          current_acc = accuracy;
          improved = true;
          if (miss(current_acc) <= target.tolerance) return {current, current_acc};
        }
      }
    }
    if (!improved) break;
  }
  throw CalibrationError(
      strprintf("calibrate: search exhausted at accuracy %.5f (target %.5f +/- %.5f); best point "
                "dark_rate=%.6g bright_decay_tau=%.6g dark_pump_tau_ref=%.6g",
                current_acc, target.accuracy, target.tolerance, current.dark_rate,
                current.bright_decay_tau, current.dark_pump_tau_ref),
      current, current_acc);
}

const char* to_string(Method method) {
  switch (method) {
    case Method::Threshold:
      return "threshold";
    case Method::MaxLikelihood:
      return "ml";
    case Method::Cnn:
      return "cnn";
    case Method::FcnnWide:
      return "fcnn_wide";
    case Method::FcnnOnboard:
      return "fcnn_onboard";
    case Method::Logistic:
      return "logistic";
  }
  return "unknown";
}

WilsonInterval wilson_interval(long correct, long n) {
  if (n < 1) throw std::invalid_argument("wilson_interval: n must be positive");
  if (correct < 0 || correct > n)
    throw std::invalid_argument("wilson_interval: correct must be in [0, n]");
  const double z2 = kWilsonZ * kWilsonZ;
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(correct) / nn;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half =
      kWilsonZ / denom * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn));
  // The score interval contains the point estimate by construction; the
  // min/max against phat repairs last-ulp rounding at the extremes.
  return {std::min(std::max(0.0, center - half), phat), std::max(std::min(1.0, center + half), phat)};
}

ExperimentReport fidelity_curve(Method method, const PhysicsParams& params,
                                const std::vector<int>& bins_list, long n_samples,
                                std::uint64_t seed, int n_threads) {
  check_common(params, bins_list, n_samples);
  ExperimentReport report{"fidelity_curve", to_string(method), params.fingerprint(), seed, {}};

  const LabeledDataset eval_full =
      generate_dataset(params, static_cast<std::size_t>(n_samples), 0.5,
                       role_seed(seed, kEvalRole, 0), n_threads);
  LabeledDataset train_full;
  if (method != Method::MaxLikelihood)
    train_full = generate_dataset(params, static_cast<std::size_t>(kTrainPerEval * n_samples), 0.5,
                                  role_seed(seed, kTrainRole, 0), n_threads);

  // The classical models are built once on the full window: the threshold
  // from a single training fit, ML from the physics. Only the neural methods
  // retrain per bin count.
  ThresholdModel threshold_model;
  HmmModel hmm_model;
  if (method == Method::Threshold) threshold_model = fit_threshold(train_full);
  if (method == Method::MaxLikelihood) hmm_model = HmmModel::from_physics(params);

  for (std::size_t i = 0; i < bins_list.size(); ++i) {
    const int k = bins_list[i];
    EvalOutcome out;
    if (method == Method::Threshold) {
      out = eval_threshold(threshold_model, prefix(eval_full, k));
    } else if (method == Method::MaxLikelihood) {
      out = eval_ml(hmm_model, prefix(eval_full, k));
    } else {
      const TrainedNet net = fit_net(method, train_full, k, role_seed(seed, kFitRole, i), n_threads);
      out = eval_net(net, shaped(eval_full, k, net.width));
    }
    report.rows.push_back(make_row(strprintf("bins=%d", k), params.laser_power_uw, k, n_samples, out));
  }
  return report;
}

ExperimentReport power_sweep(Method method, const PhysicsParams& params,
                             const std::vector<double>& powers_uw,
                             const std::vector<int>& bins_list, long n_samples, std::uint64_t seed,
                             int n_threads) {
  check_common(params, bins_list, n_samples);
  if (powers_uw.empty()) throw std::invalid_argument("bench: powers_uw is empty");

  ExperimentReport report{"power_sweep", to_string(method), params.fingerprint(), seed, {}};
  for (std::size_t pi = 0; pi < powers_uw.size(); ++pi) {
    const PhysicsParams at = params.at_power(powers_uw[pi]);
    const LabeledDataset eval_full = generate_dataset(
        at, static_cast<std::size_t>(n_samples), 0.5, role_seed(seed, kEvalRole, pi), n_threads);
    LabeledDataset train_full;
    if (method != Method::MaxLikelihood)
      train_full =
          generate_dataset(at, static_cast<std::size_t>(kTrainPerEval * n_samples), 0.5,
                           role_seed(seed, kTrainRole, pi), n_threads);
    const HmmModel hmm_model =
        method == Method::MaxLikelihood ? HmmModel::from_physics(at) : HmmModel{};

    for (std::size_t bi = 0; bi < bins_list.size(); ++bi) {
      const int k = bins_list[bi];
      const std::uint64_t condition = pi * bins_list.size() + bi;
      EvalOutcome out;
      if (method == Method::Threshold) {
        // Unlike the fixed-physics window scan, detection conditions change
        // with power, so the threshold refits per (power, bins).
        out = eval_threshold(fit_threshold(prefix(train_full, k)), prefix(eval_full, k));
      } else if (method == Method::MaxLikelihood) {
        out = eval_ml(hmm_model, prefix(eval_full, k));
      } else {
        const TrainedNet net =
            fit_net(method, train_full, k, role_seed(seed, kFitRole, condition), n_threads);
        out = eval_net(net, shaped(eval_full, k, net.width));
      }
      report.rows.push_back(make_row(strprintf("P=%.2fuW bins=%d", at.laser_power_uw, k),
                                     at.laser_power_uw, k, n_samples, out));
    }
  }
  return report;
}

ExperimentReport method_table(const PhysicsParams& params, long n_samples, std::uint64_t seed,
                              int n_threads) {
  params.validate();
  if (n_samples < 1) throw std::invalid_argument("bench: n_samples must be positive");

  ExperimentReport report{"method_table", "all", params.fingerprint(), seed, {}};
  const LabeledDataset train_full =
      generate_dataset(params, static_cast<std::size_t>(kTrainPerEval * n_samples), 0.5,
                       role_seed(seed, kTrainRole, 0), n_threads);
  const LabeledDataset eval_full = generate_dataset(
      params, static_cast<std::size_t>(n_samples), 0.5, role_seed(seed, kEvalRole, 0), n_threads);
  const int k = params.n_sub_bins;
  auto push = [&](Method method, const EvalOutcome& out) {
    report.rows.push_back(
        make_row(to_string(method), params.laser_power_uw, k, n_samples, out));
  };

  push(Method::Threshold, eval_threshold(fit_threshold(train_full), eval_full));
  push(Method::MaxLikelihood, eval_ml(HmmModel::from_physics(params), eval_full));
  for (Method method : {Method::Logistic, Method::FcnnWide, Method::Cnn}) {
    const TrainedNet net = fit_net(method, train_full, k,
                                   role_seed(seed, kFitRole, static_cast<std::uint64_t>(method)),
                                   n_threads);
    push(method, eval_net(net, shaped(eval_full, k, net.width)));
  }
  return report;
}

std::optional<int> min_bins_for(const ExperimentReport& report, double level) {
  std::optional<int> best;
  for (const ReportRow& row : report.rows)
    if (row.n_bins > 0 && row.accuracy >= level && (!best || row.n_bins < *best))
      best = row.n_bins;
  return best;
}

std::string render_table(const ExperimentReport& report) {
  std::string out =
      strprintf("experiment=%s method=%s seed=%llu fingerprint=%016llx\n", report.experiment.c_str(),
                report.method.c_str(), static_cast<unsigned long long>(report.seed),
                static_cast<unsigned long long>(report.physics_fingerprint));
  bool timing = false;
  for (const ReportRow& row : report.rows) timing = timing || row.per_sample_us > 0.0;
  out += strprintf("%-22s %8s %8s %10s %10s %10s", "condition", "n", "correct", "accuracy",
                   "ci_low", "ci_high");
  if (timing) out += strprintf(" %12s", "us/sample");
  out += '\n';
  for (const ReportRow& row : report.rows) {
    out += strprintf("%-22s %8ld %8ld %10.5f %10.5f %10.5f", row.condition.c_str(), row.n,
                     row.correct, row.accuracy, row.ci_low, row.ci_high);
    if (timing) out += strprintf(" %12.3f", row.per_sample_us);
    out += '\n';
  }
  return out;
}

void write_csv(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("bench: cannot open " + path + " for writing");
  out << "condition,n,correct,accuracy,ci_low,ci_high\n";
  for (const ReportRow& row : report.rows)
    out << strprintf("%s,%ld,%ld,%.17g,%.17g,%.17g\n", row.condition.c_str(), row.n, row.correct,
                     row.accuracy, row.ci_low, row.ci_high);
  out.flush();
  if (!out) throw std::runtime_error("bench: write failed: " + path);
}

std::string report_filename(const ExperimentReport& report, const std::string& ext) {
  return strprintf("%s_%s_seed%llu_fp%016llx.%s", report.experiment.c_str(), report.method.c_str(),
                   static_cast<unsigned long long>(report.seed),
                   static_cast<unsigned long long>(report.physics_fingerprint), ext.c_str());
}

}  // namespace ionread
