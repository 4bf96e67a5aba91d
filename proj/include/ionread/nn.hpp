#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ionread/physics.hpp"

namespace ionread {

struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct TrainingError : std::runtime_error {
  TrainingError(const std::string& what, long step_);
  long step;
};

/// Dense row-major value container. Training math is 64-bit throughout; the
/// 32-bit path exists only on the quantized inference side.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<int> shape_);
  long size() const { return static_cast<long>(data.size()); }
};

enum class LayerKind { Dense, Conv1d, Relu, MaxPool, Flatten };

const char* to_string(LayerKind kind);

/// One layer of the fixed five-kind vocabulary. Activations flow as
/// (channels, width) pairs laid out channel-major: value(c, x) = data[c*W + x].
/// Flatten is therefore a shape-only operation.
struct LayerDesc {
  LayerKind kind = LayerKind::Relu;
  int in = 0;      // Dense: input width.  Conv1d: input channels.
  int out = 0;     // Dense: output width. Conv1d: output channels.
  int kernel = 0;  // Conv1d: odd kernel size, zero-padded "same" convolution.
  int pool = 0;    // MaxPool: window and stride.

  static LayerDesc dense(int in, int out);
  static LayerDesc conv1d(int in_ch, int out_ch, int kernel = 5);
  static LayerDesc relu();
  static LayerDesc maxpool(int size = 2);
  static LayerDesc flatten();
};

struct LayerExtent {
  int channels = 1;
  int width = 0;
  long flat() const { return static_cast<long>(channels) * width; }
};

struct NetworkSpec {
  int input_width = 0;
  std::vector<LayerDesc> layers;

  /// Activation extents before layer 0, between layers, and after the last
  /// layer (size layers+1). Throws ShapeError when shapes do not compose or
  /// a pool does not divide its input width. Classifier entry points
  /// (train/predict/evaluate) additionally require a 2-wide flat output.
  std::vector<LayerExtent> extents() const;
  void validate() const { (void)extents(); }
  long param_count() const;
};

/// Conv(1->16,k5) ReLU Pool2 Conv(16->32,k5) ReLU Pool2 Flatten Dense(->240)
/// ReLU Dense(240->2). n_sub_bins must be divisible by 4 (two pool stages).
NetworkSpec cnn_spec(int n_sub_bins = 100);
/// Dense(10->20) ReLU Dense(20->2); 262 parameters. Input width is fixed at
/// 10; shorter detection windows are zero-padded (pad_dataset).
NetworkSpec fcnn_onboard_spec();
/// Dense(n->64) ReLU Dense(64->2): the mid-capacity fully-connected tester.
NetworkSpec fcnn_wide_spec(int n_inputs);
/// Dense(n->2): logistic-regression baseline as a degenerate network.
NetworkSpec logistic_spec(int n_inputs);

/// weight/bias per layer; non-parametric layers hold empty tensors.
struct LayerParams {
  Tensor weight, bias;
};
using Params = std::vector<LayerParams>;

/// Glorot-uniform weights (±sqrt(6/(fan_in+fan_out))), zero biases,
/// deterministic per (spec, seed).
Params init_params(const NetworkSpec& spec, std::uint64_t seed);
Params zero_like(const Params& params);

/// Single-sample forward pass; returns the final activation vector.
std::vector<double> forward(const NetworkSpec& spec, const Params& params,
                            std::span<const double> input);

/// Sum over outputs of |y - target|.
double l1_loss(std::span<const double> outputs, std::span<const double> targets);

/// Batch loss (sum of per-sample L1 losses) and its gradient with respect to
/// every parameter, accumulated into `grads` (which must be zero_like-shaped).
/// The batch is processed in a fixed number of index-ordered chunks whose
/// partial gradients are merged in ascending chunk order, so the result is
/// bit-identical for any n_threads.
double l1_batch_gradient(const NetworkSpec& spec, const Params& params,
                         const std::vector<std::vector<double>>& inputs,
                         const std::vector<std::vector<double>>& targets, Params& grads,
                         int n_threads = 1);

struct AdamState {
  Params m, v;
  long t = 0;
};
AdamState adam_init(const Params& params);
/// Standard bias-corrected Adam (beta1 0.9, beta2 0.999, eps 1e-8).
void adam_step(Params& params, const Params& grads, AdamState& state, double lr,
               double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

/// Optional input standardization: x -> (x - shift) / scale. Defaults to the
/// identity; train() fills it only when TrainConfig.standardize is set.
struct InputNorm {
  double shift = 0.0;
  double scale = 1.0;
};

struct TrainConfig {
  double lr_start = 1e-3;
  double lr_end = 1e-4;  // exponential decay from lr_start to lr_end
  int batch_size = 64;
  long total_samples = 200000;  // presentations, sampled with replacement
  double holdout_fraction = 0.05;
  bool standardize = false;
  std::uint64_t seed = 0;
  int n_threads = 1;
};

struct TrainResult {
  Params params;
  InputNorm norm;
  double holdout_accuracy = 0.0;
  double final_batch_loss = 0.0;
  long steps = 0;
  std::vector<std::pair<long, double>> loss_log;  // sparse (step, batch loss)
};

/// Adam + L1 training on the leading (1 - holdout_fraction) of the dataset;
/// the tail is the holdout split. Deterministic given cfg.seed. Throws
/// TrainingError (with the step index) if a batch loss goes non-finite,
/// std::invalid_argument if the training split is single-class.
TrainResult train(const NetworkSpec& spec, const LabeledDataset& data, const TrainConfig& cfg);

/// Bright iff y[0] > y[1]; exact tie is Dark.
StateLabel predict(const NetworkSpec& spec, const Params& params, std::span<const int> counts,
                   const InputNorm& norm = {});
double evaluate(const NetworkSpec& spec, const Params& params, const LabeledDataset& data,
                const InputNorm& norm = {});

/// Zero-extend every trajectory to `width` sub-bins (fixed-input networks
/// reading shorter detection windows).
LabeledDataset pad_dataset(const LabeledDataset& data, int width);

}  // namespace ionread
