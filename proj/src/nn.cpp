#include "ionread/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "ionread/rng.hpp"

namespace ionread {

namespace {

constexpr std::uint64_t kInitTag = 0x696e69747365656dull;
constexpr std::uint64_t kBatchTag = 0x6261746368736565ull;
constexpr int kGradChunks = 8;

}  // namespace

TrainingError::TrainingError(const std::string& what, long step_)
    : std::runtime_error(what), step(step_) {}

Tensor::Tensor(std::vector<int> shape_) : shape(std::move(shape_)) {
  long n = 1;
  for (int e : shape) {
    if (e <= 0) throw ShapeError("tensor extent must be positive");
    n *= e;
  }
  data.assign(static_cast<std::size_t>(n), 0.0);
}

const char* to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Dense: return "dense";
    case LayerKind::Conv1d: return "conv1d";
    case LayerKind::Relu: return "relu";
    case LayerKind::MaxPool: return "maxpool";
    case LayerKind::Flatten: return "flatten";
  }
  return "?";
}

LayerDesc LayerDesc::dense(int in, int out) { return {LayerKind::Dense, in, out, 0, 0}; }
LayerDesc LayerDesc::conv1d(int in_ch, int out_ch, int kernel) {
  return {LayerKind::Conv1d, in_ch, out_ch, kernel, 0};
}
LayerDesc LayerDesc::relu() { return {LayerKind::Relu, 0, 0, 0, 0}; }
LayerDesc LayerDesc::maxpool(int size) { return {LayerKind::MaxPool, 0, 0, 0, size}; }
LayerDesc LayerDesc::flatten() { return {LayerKind::Flatten, 0, 0, 0, 0}; }

std::vector<LayerExtent> NetworkSpec::extents() const {
  if (input_width < 1) throw ShapeError("network input width must be >= 1");
  std::vector<LayerExtent> ext;
  ext.reserve(layers.size() + 1);
  ext.push_back({1, input_width});
  for (std::size_t li = 0; li < layers.size(); ++li) {
    const LayerDesc& l = layers[li];
    const LayerExtent cur = ext.back();
    const std::string at = "layer " + std::to_string(li) + " (" + to_string(l.kind) + "): ";
    switch (l.kind) {
      case LayerKind::Dense:
        if (cur.channels != 1)
          throw ShapeError(at + "dense input must be flat (got " +
                           std::to_string(cur.channels) + " channels)");
        if (l.in != cur.width)
          throw ShapeError(at + "expects width " + std::to_string(l.in) + ", got " +
                           std::to_string(cur.width));
        if (l.out < 1) throw ShapeError(at + "output width must be >= 1");
        ext.push_back({1, l.out});
        break;
      case LayerKind::Conv1d:
        if (l.in != cur.channels)
          throw ShapeError(at + "expects " + std::to_string(l.in) + " channels, got " +
                           std::to_string(cur.channels));
        if (l.out < 1) throw ShapeError(at + "output channels must be >= 1");
        if (l.kernel < 1 || l.kernel % 2 == 0)
          throw ShapeError(at + "kernel must be odd and positive");
        ext.push_back({l.out, cur.width});
        break;
      case LayerKind::Relu:
        ext.push_back(cur);
        break;
      case LayerKind::MaxPool:
        if (l.pool < 1) throw ShapeError(at + "pool size must be >= 1");
        if (cur.width % l.pool != 0)
          throw ShapeError(at + "pool " + std::to_string(l.pool) + " does not divide width " +
                           std::to_string(cur.width));
        ext.push_back({cur.channels, cur.width / l.pool});
        break;
      case LayerKind::Flatten:
        ext.push_back({1, static_cast<int>(cur.flat())});
        break;
    }
  }
  return ext;
}

namespace {

void require_binary_output(const std::vector<LayerExtent>& ext) {
  if (ext.back().channels != 1 || ext.back().width != 2)
    throw ShapeError("classifier network must end with exactly 2 outputs");
}

}  // namespace

long NetworkSpec::param_count() const {
  (void)extents();
  long n = 0;
  for (const LayerDesc& l : layers) {
    if (l.kind == LayerKind::Dense) n += static_cast<long>(l.in) * l.out + l.out;
    if (l.kind == LayerKind::Conv1d) n += static_cast<long>(l.kernel) * l.in * l.out + l.out;
  }
  return n;
}

NetworkSpec cnn_spec(int n_sub_bins) {
  if (n_sub_bins < 4 || n_sub_bins % 4 != 0)
    throw ShapeError("cnn_spec: input width must be a positive multiple of 4, got " +
                     std::to_string(n_sub_bins));
  NetworkSpec s;
  s.input_width = n_sub_bins;
  s.layers = {
      LayerDesc::conv1d(1, 16, 5),  LayerDesc::relu(), LayerDesc::maxpool(2),
      LayerDesc::conv1d(16, 32, 5), LayerDesc::relu(), LayerDesc::maxpool(2),
      LayerDesc::flatten(),
      LayerDesc::dense(32 * (n_sub_bins / 4), 240),
      LayerDesc::relu(),
      LayerDesc::dense(240, 2),
  };
  s.validate();
  return s;
}

NetworkSpec fcnn_onboard_spec() {
  NetworkSpec s;
  s.input_width = 10;
  s.layers = {LayerDesc::dense(10, 20), LayerDesc::relu(), LayerDesc::dense(20, 2)};
  s.validate();
  return s;
}

NetworkSpec fcnn_wide_spec(int n_inputs) {
  NetworkSpec s;
  s.input_width = n_inputs;
  s.layers = {LayerDesc::dense(n_inputs, 64), LayerDesc::relu(), LayerDesc::dense(64, 2)};
  s.validate();
  return s;
}

NetworkSpec logistic_spec(int n_inputs) {
  NetworkSpec s;
  s.input_width = n_inputs;
  s.layers = {LayerDesc::dense(n_inputs, 2)};
  s.validate();
  return s;
}

Params init_params(const NetworkSpec& spec, std::uint64_t seed) {
  spec.validate();
  Params params(spec.layers.size());
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& l = spec.layers[li];
    long fan_in = 0, fan_out = 0;
    if (l.kind == LayerKind::Dense) {
      params[li].weight = Tensor({l.out, l.in});
      params[li].bias = Tensor({l.out});
      fan_in = l.in;
      fan_out = l.out;
    } else if (l.kind == LayerKind::Conv1d) {
      params[li].weight = Tensor({l.out, l.in, l.kernel});
      params[li].bias = Tensor({l.out});
      fan_in = static_cast<long>(l.in) * l.kernel;
      fan_out = static_cast<long>(l.out) * l.kernel;
    } else {
      continue;
    }
    Rng rng(derive_seed(seed ^ kInitTag, li));
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    for (double& w : params[li].weight.data) w = rng.uniform(-bound, bound);
  }
  return params;
}

Params zero_like(const Params& params) {
  Params z(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (params[i].weight.size() == 0) continue;
    z[i].weight = Tensor(params[i].weight.shape);
    z[i].bias = Tensor(params[i].bias.shape);
  }
  return z;
}

namespace {

/// Per-sample forward/backward scratch. act[i] is the input of layer i;
/// act.back() is the network output. argmax stores pool winners per layer.
struct Workspace {
  std::vector<std::vector<double>> act;
  std::vector<std::vector<int>> argmax;
  std::vector<std::vector<double>> grad;  // same shapes as act

  explicit Workspace(const NetworkSpec& spec) {
    const auto ext = spec.extents();
    act.resize(ext.size());
    grad.resize(ext.size());
    argmax.resize(spec.layers.size());
    for (std::size_t i = 0; i < ext.size(); ++i) {
      act[i].assign(static_cast<std::size_t>(ext[i].flat()), 0.0);
      grad[i].assign(act[i].size(), 0.0);
    }
    for (std::size_t li = 0; li < spec.layers.size(); ++li)
      if (spec.layers[li].kind == LayerKind::MaxPool)
        argmax[li].assign(static_cast<std::size_t>(ext[li + 1].flat()), 0);
  }
};

void forward_ws(const NetworkSpec& spec, const std::vector<LayerExtent>& ext, const Params& params,
                Workspace& ws) {
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& l = spec.layers[li];
    const std::vector<double>& x = ws.act[li];
    std::vector<double>& y = ws.act[li + 1];
    switch (l.kind) {
      case LayerKind::Dense: {
        const double* w = params[li].weight.data.data();
        for (int o = 0; o < l.out; ++o) {
          const double* row = w + static_cast<long>(o) * l.in;
          double acc = params[li].bias.data[o];
          for (int i = 0; i < l.in; ++i) acc += row[i] * x[i];
          y[o] = acc;
        }
        break;
      }
      case LayerKind::Conv1d: {
        const int w_len = ext[li].width;
        const int pad = l.kernel / 2;
        const double* wt = params[li].weight.data.data();
        for (int oc = 0; oc < l.out; ++oc) {
          double* out = y.data() + static_cast<long>(oc) * w_len;
          std::fill(out, out + w_len, params[li].bias.data[oc]);
          for (int ic = 0; ic < l.in; ++ic) {
            const double* in = x.data() + static_cast<long>(ic) * w_len;
            const double* krow = wt + (static_cast<long>(oc) * l.in + ic) * l.kernel;
            for (int j = 0; j < l.kernel; ++j) {
              const double wv = krow[j];
              const int shift = j - pad;
              const int lo = std::max(0, -shift);
              const int hi = std::min(w_len, w_len - shift);
              for (int p = lo; p < hi; ++p) out[p] += wv * in[p + shift];
            }
          }
        }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
        break;
      case LayerKind::MaxPool: {
        const int w_in = ext[li].width;
        const int w_out = ext[li + 1].width;
        std::vector<int>& arg = ws.argmax[li];
        for (int c = 0; c < ext[li].channels; ++c) {
          const double* in = x.data() + static_cast<long>(c) * w_in;
          double* out = y.data() + static_cast<long>(c) * w_out;
          int* am = arg.data() + static_cast<long>(c) * w_out;
          for (int p = 0; p < w_out; ++p) {
            int best = p * l.pool;
            double bv = in[best];
            for (int q = 1; q < l.pool; ++q) {
              // strict comparison: ties keep the first maximal element
              if (in[p * l.pool + q] > bv) {
                best = p * l.pool + q;
                bv = in[best];
              }
            }
            out[p] = bv;
            am[p] = best;
          }
        }
        break;
      }
      case LayerKind::Flatten:
        y = x;  // channel-major layout makes flatten a copy with a new shape
        break;
    }
  }
}

void backward_ws(const NetworkSpec& spec, const std::vector<LayerExtent>& ext,
                 const Params& params, Workspace& ws, Params& grads) {
  for (std::size_t ri = spec.layers.size(); ri-- > 0;) {
    const LayerDesc& l = spec.layers[ri];
    const std::vector<double>& x = ws.act[ri];
    const std::vector<double>& gy = ws.grad[ri + 1];
    std::vector<double>& gx = ws.grad[ri];
    switch (l.kind) {
      case LayerKind::Dense: {
        std::fill(gx.begin(), gx.end(), 0.0);
        const double* w = params[ri].weight.data.data();
        double* gw = grads[ri].weight.data.data();
        for (int o = 0; o < l.out; ++o) {
          const double g = gy[o];
          grads[ri].bias.data[o] += g;
          const double* row = w + static_cast<long>(o) * l.in;
          double* grow = gw + static_cast<long>(o) * l.in;
          for (int i = 0; i < l.in; ++i) {
            grow[i] += g * x[i];
            gx[i] += g * row[i];
          }
        }
        break;
      }
      case LayerKind::Conv1d: {
        std::fill(gx.begin(), gx.end(), 0.0);
        const int w_len = ext[ri].width;
        const int pad = l.kernel / 2;
        const double* wt = params[ri].weight.data.data();
        double* gw = grads[ri].weight.data.data();
        for (int oc = 0; oc < l.out; ++oc) {
          const double* g = gy.data() + static_cast<long>(oc) * w_len;
          double acc_b = 0.0;
          for (int p = 0; p < w_len; ++p) acc_b += g[p];
          grads[ri].bias.data[oc] += acc_b;
          for (int ic = 0; ic < l.in; ++ic) {
            const double* in = x.data() + static_cast<long>(ic) * w_len;
            double* gin = gx.data() + static_cast<long>(ic) * w_len;
            const double* krow = wt + (static_cast<long>(oc) * l.in + ic) * l.kernel;
            double* gkrow = gw + (static_cast<long>(oc) * l.in + ic) * l.kernel;
            for (int j = 0; j < l.kernel; ++j) {
              const int shift = j - pad;
              const int lo = std::max(0, -shift);
              const int hi = std::min(w_len, w_len - shift);
              double acc_w = 0.0;
              const double wv = krow[j];
              for (int p = lo; p < hi; ++p) {
                acc_w += g[p] * in[p + shift];
                gin[p + shift] += g[p] * wv;
              }
              gkrow[j] += acc_w;
            }
          }
        }
        break;
      }
      case LayerKind::Relu:
        for (std::size_t i = 0; i < x.size(); ++i) gx[i] = x[i] > 0.0 ? gy[i] : 0.0;
        break;
      case LayerKind::MaxPool: {
        std::fill(gx.begin(), gx.end(), 0.0);
        const int w_in = ext[ri].width;
        const int w_out = ext[ri + 1].width;
        const std::vector<int>& arg = ws.argmax[ri];
        for (int c = 0; c < ext[ri].channels; ++c) {
          const double* g = gy.data() + static_cast<long>(c) * w_out;
          double* gin = gx.data() + static_cast<long>(c) * w_in;
          const int* am = arg.data() + static_cast<long>(c) * w_out;
          for (int p = 0; p < w_out; ++p) gin[am[p]] += g[p];
        }
        break;
      }
      case LayerKind::Flatten:
        gx = gy;
        break;
    }
  }
}

double sgn(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

/// Forward + L1 backward for samples [begin, end); returns the summed loss.
double chunk_gradient(const NetworkSpec& spec, const std::vector<LayerExtent>& ext,
                      const Params& params, const std::vector<std::vector<double>>& inputs,
                      const std::vector<std::vector<double>>& targets, std::size_t begin,
                      std::size_t end, Workspace& ws, Params& grads) {
  double loss = 0.0;
  for (std::size_t s = begin; s < end; ++s) {
    if (inputs[s].size() != ws.act[0].size())
      throw ShapeError("input sample width does not match the network");
    if (targets[s].size() != ws.act.back().size())
      throw ShapeError("target width does not match the network output");
    ws.act[0] = inputs[s];
    forward_ws(spec, ext, params, ws);
    const std::vector<double>& y = ws.act.back();
    for (std::size_t k = 0; k < y.size(); ++k) {
      const double r = y[k] - targets[s][k];
      loss += std::abs(r);
      ws.grad.back()[k] = sgn(r);
    }
    backward_ws(spec, ext, params, ws, grads);
  }
  return loss;
}

void add_into(Params& total, const Params& part) {
  for (std::size_t li = 0; li < total.size(); ++li) {
    for (long i = 0; i < part[li].weight.size(); ++i)
      total[li].weight.data[i] += part[li].weight.data[i];
    for (long i = 0; i < part[li].bias.size(); ++i)
      total[li].bias.data[i] += part[li].bias.data[i];
  }
}

std::vector<double> to_input(std::span<const int> counts, const InputNorm& norm) {
  std::vector<double> x(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i)
    x[i] = (static_cast<double>(counts[i]) - norm.shift) / norm.scale;
  return x;
}

std::vector<double> one_hot(StateLabel label) {
  return label == StateLabel::Bright ? std::vector<double>{1.0, 0.0}
                                     : std::vector<double>{0.0, 1.0};
}

}  // namespace

std::vector<double> forward(const NetworkSpec& spec, const Params& params,
                            std::span<const double> input) {
  const auto ext = spec.extents();
  if (params.size() != spec.layers.size())
    throw ShapeError("parameter set does not match the network layer count");
  Workspace ws(spec);
  if (input.size() != ws.act[0].size())
    throw ShapeError("input width " + std::to_string(input.size()) + ", network expects " +
                     std::to_string(ws.act[0].size()));
  std::copy(input.begin(), input.end(), ws.act[0].begin());
  forward_ws(spec, ext, params, ws);
  return ws.act.back();
}

double l1_loss(std::span<const double> outputs, std::span<const double> targets) {
  if (outputs.size() != targets.size()) throw ShapeError("loss shapes do not match");
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.size(); ++i) loss += std::abs(outputs[i] - targets[i]);
  return loss;
}

double l1_batch_gradient(const NetworkSpec& spec, const Params& params,
                         const std::vector<std::vector<double>>& inputs,
                         const std::vector<std::vector<double>>& targets, Params& grads,
                         int n_threads) {
  if (inputs.size() != targets.size()) throw ShapeError("batch inputs/targets size mismatch");
  const auto ext = spec.extents();
  const std::size_t n = inputs.size();
  const int chunks = static_cast<int>(std::min<std::size_t>(kGradChunks, std::max<std::size_t>(n, 1)));

  std::vector<Params> partial(chunks);
  std::vector<double> losses(chunks, 0.0);
  for (int c = 0; c < chunks; ++c) partial[c] = zero_like(params);

  auto run_chunk = [&](int c) {
    const std::size_t begin = n * c / chunks;
    const std::size_t end = n * (c + 1) / chunks;
    Workspace ws(spec);
    losses[c] = chunk_gradient(spec, ext, params, inputs, targets, begin, end, ws, partial[c]);
  };

  if (n_threads <= 1 || chunks == 1) {
    for (int c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(chunks);
    for (int c = 0; c < chunks; ++c) pool.emplace_back(run_chunk, c);
    for (auto& t : pool) t.join();
  }

  // ascending merge keeps the floating-point result thread-count independent
  double loss = 0.0;
  for (int c = 0; c < chunks; ++c) {
    loss += losses[c];
    add_into(grads, partial[c]);
  }
  return loss;
}

AdamState adam_init(const Params& params) {
  AdamState s;
  s.m = zero_like(params);
  s.v = zero_like(params);
  return s;
}

void adam_step(Params& params, const Params& grads, AdamState& state, double lr, double beta1,
               double beta2, double eps) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                    std::vector<double>& v) {
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
  };
  for (std::size_t li = 0; li < params.size(); ++li) {
    if (params[li].weight.size() == 0) continue;
    update(params[li].weight.data, grads[li].weight.data, state.m[li].weight.data,
           state.v[li].weight.data);
    update(params[li].bias.data, grads[li].bias.data, state.m[li].bias.data,
           state.v[li].bias.data);
  }
}

TrainResult train(const NetworkSpec& spec, const LabeledDataset& data, const TrainConfig& cfg) {
  require_binary_output(spec.extents());
  if (data.size() == 0) throw std::invalid_argument("train: empty dataset");
  if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
  if (cfg.total_samples < 1) throw std::invalid_argument("train: total_samples must be >= 1");
  if (!(cfg.lr_start > 0.0) || !(cfg.lr_end > 0.0))
    throw std::invalid_argument("train: learning rates must be positive");
  if (cfg.holdout_fraction < 0.0 || cfg.holdout_fraction >= 1.0)
    throw std::invalid_argument("train: holdout_fraction must be in [0, 1)");
  if (data.n_sub_bins != spec.input_width)
    throw ShapeError("train: dataset width " + std::to_string(data.n_sub_bins) +
                     " does not match network input " + std::to_string(spec.input_width));

  const std::size_t n_total = data.size();
  const std::size_t n_train =
      std::max<std::size_t>(1, n_total - static_cast<std::size_t>(cfg.holdout_fraction * n_total));
  bool has_bright = false, has_dark = false;
  for (std::size_t i = 0; i < n_train; ++i) {
    (data.trajectories[i].true_label == StateLabel::Bright ? has_bright : has_dark) = true;
  }
  if (!has_bright || !has_dark)
    throw std::invalid_argument("train: training split must contain both classes");

  TrainResult result;
  result.norm = InputNorm{};
  if (cfg.standardize) {
    double sum = 0.0, sq = 0.0;
    long n_vals = 0;
    for (std::size_t i = 0; i < n_train; ++i)
      for (int c : data.trajectories[i].counts) {
        sum += c;
        sq += static_cast<double>(c) * c;
        ++n_vals;
      }
    const double mean = sum / static_cast<double>(n_vals);
    const double var = std::max(sq / static_cast<double>(n_vals) - mean * mean, 1e-12);
    result.norm = InputNorm{mean, std::sqrt(var)};
  }

  // materialize training inputs once (counts are small; doubles are cheap)
  std::vector<std::vector<double>> train_x(n_train);
  std::vector<std::vector<double>> train_t(n_train);
  for (std::size_t i = 0; i < n_train; ++i) {
    train_x[i] = to_input(data.trajectories[i].counts, result.norm);
    train_t[i] = one_hot(data.trajectories[i].true_label);
  }

  Params params = init_params(spec, cfg.seed);
  AdamState adam = adam_init(params);
  Params grads = zero_like(params);

  const long steps = (cfg.total_samples + cfg.batch_size - 1) / cfg.batch_size;
  const double decay = cfg.lr_end / cfg.lr_start;
  std::vector<std::vector<double>> batch_x(cfg.batch_size), batch_t(cfg.batch_size);
  for (long s = 0; s < steps; ++s) {
    Rng rng(derive_seed(cfg.seed ^ kBatchTag, static_cast<std::uint64_t>(s)));
    for (int b = 0; b < cfg.batch_size; ++b) {
      const std::size_t idx = static_cast<std::size_t>(rng.bounded(n_train));
      batch_x[b] = train_x[idx];
      batch_t[b] = train_t[idx];
    }
    const double lr =
        steps > 1 ? cfg.lr_start * std::pow(decay, static_cast<double>(s) / (steps - 1))
                  : cfg.lr_start;
    for (auto& lp : grads) {
      std::fill(lp.weight.data.begin(), lp.weight.data.end(), 0.0);
      std::fill(lp.bias.data.begin(), lp.bias.data.end(), 0.0);
    }
    const double loss = l1_batch_gradient(spec, params, batch_x, batch_t, grads, cfg.n_threads);
    if (!std::isfinite(loss))
      throw TrainingError("train: batch loss became non-finite at step " + std::to_string(s), s);
    adam_step(params, grads, adam, lr);
    result.final_batch_loss = loss;
    if (s % 250 == 0 || s == steps - 1) result.loss_log.emplace_back(s, loss);
  }
  result.steps = steps;
  result.params = std::move(params);

  // holdout split = dataset tail
  if (n_train < n_total) {
    LabeledDataset holdout;
    holdout.n_sub_bins = data.n_sub_bins;
    holdout.sub_bin_duration = data.sub_bin_duration;
    holdout.trajectories.assign(data.trajectories.begin() + static_cast<long>(n_train),
                                data.trajectories.end());
    result.holdout_accuracy = evaluate(spec, result.params, holdout, result.norm);
  } else {
    result.holdout_accuracy = std::numeric_limits<double>::quiet_NaN();
  }
  return result;
}

StateLabel predict(const NetworkSpec& spec, const Params& params, std::span<const int> counts,
                   const InputNorm& norm) {
  require_binary_output(spec.extents());
  const std::vector<double> y = forward(spec, params, to_input(counts, norm));
  return y[0] > y[1] ? StateLabel::Bright : StateLabel::Dark;
}

double evaluate(const NetworkSpec& spec, const Params& params, const LabeledDataset& data,
                const InputNorm& norm) {
  if (data.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  const auto ext = spec.extents();
  require_binary_output(ext);
  Workspace ws(spec);
  long correct = 0;
  for (const PhotonTrajectory& t : data.trajectories) {
    const std::vector<double> x = to_input(t.counts, norm);
    if (x.size() != ws.act[0].size())
      throw ShapeError("evaluate: dataset width does not match the network");
    ws.act[0] = x;
    forward_ws(spec, ext, params, ws);
    const std::vector<double>& y = ws.act.back();
    const StateLabel verdict = y[0] > y[1] ? StateLabel::Bright : StateLabel::Dark;
    correct += (verdict == t.true_label);
  }
  return static_cast<double>(correct) / static_cast<double>(data.size());
}

LabeledDataset pad_dataset(const LabeledDataset& data, int width) {
  if (width < data.n_sub_bins)
    throw std::invalid_argument("pad_dataset: width smaller than the current sub-bin count");
  LabeledDataset out = data;
  out.n_sub_bins = width;
  for (PhotonTrajectory& t : out.trajectories) {
    t.counts.resize(static_cast<std::size_t>(width), 0);
    t.hidden_path.clear();  // padded bins have no state
  }
  return out;
}

}  // namespace ionread
