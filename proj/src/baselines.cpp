#include "ionread/baselines.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "ionread/rng.hpp"

namespace ionread {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Emission means are floored so that a zero-rate state still assigns nonzero
// probability to every count and the log likelihood stays finite. The brute
// force oracle applies the same floor, so the two stay exactly comparable.
constexpr double kLambdaFloor = 1e-12;

double safe_log(double x) { return x > 0.0 ? std::log(x) : kNegInf; }

double log_sum_exp(double a, double b) {
  if (a == kNegInf) return b;
  if (b == kNegInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

// lgamma(k + 1) with a small cache; trajectory counts are almost always tiny.
double log_factorial(int k) {
  static const std::array<double, 64> table = [] {
    std::array<double, 64> t{};
    for (int i = 0; i < 64; ++i) t[i] = std::lgamma(static_cast<double>(i) + 1.0);
    return t;
  }();
  if (k < 64) return table[static_cast<std::size_t>(k)];
  return std::lgamma(static_cast<double>(k) + 1.0);
}

struct EmissionModel {
  double lambda_bright, lambda_dark;
  double log_lambda_bright, log_lambda_dark;

  explicit EmissionModel(const HmmModel& m)
      : lambda_bright(std::max(m.lambda_bright, kLambdaFloor)),
        lambda_dark(std::max(m.lambda_dark, kLambdaFloor)),
        log_lambda_bright(std::log(lambda_bright)),
        log_lambda_dark(std::log(lambda_dark)) {}

  double log_pois_bright(int k) const {
    return k * log_lambda_bright - lambda_bright - log_factorial(k);
  }
  double log_pois_dark(int k) const {
    return k * log_lambda_dark - lambda_dark - log_factorial(k);
  }
};

void check_counts(std::span<const int> counts) {
  if (counts.empty()) throw std::invalid_argument("classify: empty count sequence");
  for (int c : counts)
    if (c < 0) throw std::invalid_argument("classify: negative count");
}

}  // namespace

ThresholdModel fit_threshold(const LabeledDataset& data) {
  if (data.trajectories.empty()) throw FitError("fit_threshold: empty dataset");

  int max_sum = 0;
  std::size_t n_bright = 0;
  std::vector<int> sums(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    sums[i] = data.trajectories[i].total();
    max_sum = std::max(max_sum, sums[i]);
    if (data.trajectories[i].true_label == StateLabel::Bright) ++n_bright;
  }
  if (n_bright == 0 || n_bright == data.size())
    throw FitError("fit_threshold: dataset contains a single class");

  // hist_bright[s] = #bright trajectories with total s, same for dark.
  std::vector<std::int64_t> hist_bright(max_sum + 1, 0), hist_dark(max_sum + 1, 0);
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.trajectories[i].true_label == StateLabel::Bright)
      ++hist_bright[sums[i]];
    else
      ++hist_dark[sums[i]];
  }

  // Walking t upward: bright trajectories with sum < t become errors,
  // dark trajectories with sum < t become correct.
  std::int64_t correct = static_cast<std::int64_t>(n_bright);  // t = 0: everything Bright
  std::int64_t best_correct = correct;
  int best_t = 0;
  for (int t = 1; t <= max_sum + 1; ++t) {
    correct += hist_dark[t - 1] - hist_bright[t - 1];
    if (correct > best_correct) {
      best_correct = correct;
      best_t = t;
    }
  }

  ThresholdModel model;
  model.threshold = best_t;
  model.fitted_on = data.params_fingerprint ^ mix64(data.seed);
  return model;
}

StateLabel threshold_classify(std::span<const int> counts, const ThresholdModel& model) {
  check_counts(counts);
  int sum = 0;
  for (int c : counts) sum += c;
  return sum >= model.threshold ? StateLabel::Bright : StateLabel::Dark;
}

HmmModel HmmModel::from_physics(const PhysicsParams& params) {
  params.validate();
  const TransitionProbs t = transition_probs(params);
  HmmModel m;
  m.lambda_bright = (saturation_rate(params, params.laser_power_uw) + params.dark_rate) *
                    params.sub_bin_duration;
  m.lambda_dark = params.dark_rate * params.sub_bin_duration;
  m.p_bright_to_dark = t.bright_to_dark;
  m.p_dark_to_bright = t.dark_to_bright;
  m.prior_bright = 0.5;
  m.prior_dark = 0.5;
  return m;
}

void HmmModel::validate() const {
  if (!(lambda_bright >= 0.0) || !(lambda_dark >= 0.0))
    throw std::invalid_argument("HmmModel: emission means must be >= 0");
  if (!(p_bright_to_dark >= 0.0 && p_bright_to_dark <= 1.0) ||
      !(p_dark_to_bright >= 0.0 && p_dark_to_bright <= 1.0))
    throw std::invalid_argument("HmmModel: transition probabilities must be in [0, 1]");
  if (!(prior_bright > 0.0) || !(prior_dark > 0.0))
    throw std::invalid_argument("HmmModel: prior weights must be positive");
}

double hmm_loglik(std::span<const int> counts, const HmmModel& model, StateLabel initial) {
  check_counts(counts);
  model.validate();
  const EmissionModel em(model);

  const double log_stay_b = safe_log(1.0 - model.p_bright_to_dark);
  const double log_flip_bd = safe_log(model.p_bright_to_dark);
  const double log_stay_d = safe_log(1.0 - model.p_dark_to_bright);
  const double log_flip_db = safe_log(model.p_dark_to_bright);

  double alpha_b = initial == StateLabel::Bright ? em.log_pois_bright(counts[0]) : kNegInf;
  double alpha_d = initial == StateLabel::Dark ? em.log_pois_dark(counts[0]) : kNegInf;
  for (std::size_t i = 1; i < counts.size(); ++i) {
    const double next_b =
        log_sum_exp(alpha_b + log_stay_b, alpha_d + log_flip_db) + em.log_pois_bright(counts[i]);
    const double next_d =
        log_sum_exp(alpha_b + log_flip_bd, alpha_d + log_stay_d) + em.log_pois_dark(counts[i]);
    alpha_b = next_b;
    alpha_d = next_d;
  }
  return log_sum_exp(alpha_b, alpha_d);
}

Classification ml_classify(std::span<const int> counts, const HmmModel& model) {
  Classification result;
  const double score_bright = std::log(model.prior_bright) +
                              hmm_loglik(counts, model, StateLabel::Bright);
  const double score_dark = std::log(model.prior_dark) +
                            hmm_loglik(counts, model, StateLabel::Dark);
  result.log_odds = score_bright - score_dark;
  result.label = result.log_odds > 0.0 ? StateLabel::Bright : StateLabel::Dark;
  return result;
}

double posterior_bright(std::span<const int> counts, const HmmModel& model) {
  const double lb = std::log(model.prior_bright) + hmm_loglik(counts, model, StateLabel::Bright);
  const double ld = std::log(model.prior_dark) + hmm_loglik(counts, model, StateLabel::Dark);
  return std::exp(lb - log_sum_exp(lb, ld));
}

double brute_force_posterior_bright(std::span<const int> counts, const HmmModel& model) {
  check_counts(counts);
  model.validate();
  if (counts.size() > 20)
    throw std::invalid_argument("brute_force_posterior_bright: limited to 20 sub-bins");
  const EmissionModel em(model);
  const std::size_t n = counts.size();

  // Probability of the counts jointly with one fully specified state path.
  auto path_probability = [&](StateLabel first, std::uint32_t flips_mask) {
    double p = 1.0;
    StateLabel state = first;
    for (std::size_t i = 0; i < n; ++i) {
      p *= std::exp(state == StateLabel::Bright ? em.log_pois_bright(counts[i])
                                                : em.log_pois_dark(counts[i]));
      if (i + 1 < n) {
        const bool flip = (flips_mask >> i) & 1u;
        if (state == StateLabel::Bright) {
          p *= flip ? model.p_bright_to_dark : 1.0 - model.p_bright_to_dark;
          if (flip) state = StateLabel::Dark;
        } else {
          p *= flip ? model.p_dark_to_bright : 1.0 - model.p_dark_to_bright;
          if (flip) state = StateLabel::Bright;
        }
      }
    }
    return p;
  };

  const std::uint32_t n_paths = n == 1 ? 1u : (1u << (n - 1));
  double total_bright = 0.0, total_dark = 0.0;
  for (std::uint32_t mask = 0; mask < n_paths; ++mask) {
    total_bright += path_probability(StateLabel::Bright, mask);
    total_dark += path_probability(StateLabel::Dark, mask);
  }
  total_bright *= model.prior_bright;
  total_dark *= model.prior_dark;
  return total_bright / (total_bright + total_dark);
}

AdaptiveClassification ml_classify_adaptive(std::span<const int> counts, const HmmModel& model,
                                            double stop_log_odds) {
  check_counts(counts);
  model.validate();
  if (!(stop_log_odds >= 0.0))
    throw std::invalid_argument("ml_classify_adaptive: stop_log_odds must be >= 0");
  const EmissionModel em(model);

  const double log_stay_b = safe_log(1.0 - model.p_bright_to_dark);
  const double log_flip_bd = safe_log(model.p_bright_to_dark);
  const double log_stay_d = safe_log(1.0 - model.p_dark_to_bright);
  const double log_flip_db = safe_log(model.p_dark_to_bright);

  // Forward state per initial-state hypothesis.
  double b_b = em.log_pois_bright(counts[0]), b_d = kNegInf;  // started Bright
  double d_b = kNegInf, d_d = em.log_pois_dark(counts[0]);    // started Dark

  AdaptiveClassification result;
  for (std::size_t i = 0;; ++i) {
    const double lb = std::log(model.prior_bright) + log_sum_exp(b_b, b_d);
    const double ld = std::log(model.prior_dark) + log_sum_exp(d_b, d_d);
    result.log_odds = lb - ld;
    result.bins_used = static_cast<int>(i) + 1;
    if (std::abs(result.log_odds) >= stop_log_odds || i + 1 == counts.size()) break;

    const int c = counts[i + 1];
    const double eb = em.log_pois_bright(c), ed = em.log_pois_dark(c);
    const double nb_b = log_sum_exp(b_b + log_stay_b, b_d + log_flip_db) + eb;
    const double nb_d = log_sum_exp(b_b + log_flip_bd, b_d + log_stay_d) + ed;
    const double nd_b = log_sum_exp(d_b + log_stay_b, d_d + log_flip_db) + eb;
    const double nd_d = log_sum_exp(d_b + log_flip_bd, d_d + log_stay_d) + ed;
    b_b = nb_b;
    b_d = nb_d;
    d_b = nd_b;
    d_d = nd_d;
  }
  result.label = result.log_odds > 0.0 ? StateLabel::Bright : StateLabel::Dark;
  return result;
}

}  // namespace ionread
