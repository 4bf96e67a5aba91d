#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>

#include "ionread/physics.hpp"

namespace ionread {

struct FitError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Integer cut on the total photon count. Verdict is Bright when the sum is
/// greater than or equal to the threshold.
struct ThresholdModel {
  int threshold = 0;
  std::uint64_t fitted_on = 0;  // fingerprint of the dataset the fit used
};

/// Exhaustive search for the integer threshold with the highest training
/// accuracy; ties resolve to the smallest threshold. Throws FitError if the
/// dataset is empty or single-class.
ThresholdModel fit_threshold(const LabeledDataset& data);

StateLabel threshold_classify(std::span<const int> counts, const ThresholdModel& model);

/// Two-state hidden Markov model with Poisson emissions, one transition
/// opportunity per sub-bin boundary. Mirrors the trajectory sampler exactly,
/// so with the generating parameters the forward likelihood is the true one.
struct HmmModel {
  double lambda_bright = 0.0;  // mean counts per sub-bin in the bright state
  double lambda_dark = 0.0;
  double p_bright_to_dark = 0.0;
  double p_dark_to_bright = 0.0;
  double prior_bright = 0.5;  // unnormalized prior weights
  double prior_dark = 0.5;

  static HmmModel from_physics(const PhysicsParams& params);
  void validate() const;
};

/// log P(counts | initial state) by the forward recursion in log space.
/// Finite for every input (emission means are floored at a tiny positive
/// value so zero-rate models cannot produce -inf).
double hmm_loglik(std::span<const int> counts, const HmmModel& model, StateLabel initial);

struct Classification {
  StateLabel label = StateLabel::Dark;
  double log_odds = 0.0;  // log posterior odds bright : dark
};

/// Maximum-likelihood verdict: Bright iff the posterior log odds are
/// strictly positive (exact ties resolve to Dark).
Classification ml_classify(std::span<const int> counts, const HmmModel& model);

/// Posterior probability that the initial state was Bright, computed with the
/// forward recursion.
double posterior_bright(std::span<const int> counts, const HmmModel& model);

/// Same posterior by explicit enumeration of all hidden state paths.
/// Exponential in the trajectory length; refuses anything longer than 20
/// sub-bins. This is the oracle the fast recursion is checked against.
double brute_force_posterior_bright(std::span<const int> counts, const HmmModel& model);

/// Early-stopping variant: consume sub-bins left to right and stop as soon as
/// |log odds| reaches stop_log_odds (or the trajectory ends).
struct AdaptiveClassification {
  StateLabel label = StateLabel::Dark;
  double log_odds = 0.0;
  int bins_used = 0;
};

AdaptiveClassification ml_classify_adaptive(std::span<const int> counts, const HmmModel& model,
                                            double stop_log_odds);

}  // namespace ionread
