// Shared finite-difference gradient check: the unit test asserts on the
// per-config results, the acceptance runner summarizes them. Central
// differences against the analytic backward pass; the network is piecewise
// affine in any single parameter, so once every ReLU preimage, pool gap, and
// loss residual clears a margin much larger than the perturbation can move
// it, the central difference is exact up to rounding.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "ionread/nn.hpp"
#include "ionread/rng.hpp"

namespace gradcheck {

constexpr double kEps = 1e-5;
constexpr double kMargin = 2e-3;  // >> worst-case activation shift (~4e-4)
constexpr double kRelTol = 1e-4;
constexpr std::uint64_t kSuiteSeed = 0x67726164636b6full;

struct Batch {
  std::vector<std::vector<double>> inputs;
  std::vector<std::vector<double>> targets;
};

/// Activation after each of the first 1..N prefixes of the stack.
inline std::vector<std::vector<double>> prefix_activations(const ionread::NetworkSpec& spec,
                                                           const ionread::Params& params,
                                                           const std::vector<double>& x) {
  std::vector<std::vector<double>> acts;
  for (std::size_t i = 1; i <= spec.layers.size(); ++i) {
    ionread::NetworkSpec sub;
    sub.input_width = spec.input_width;
    sub.layers.assign(spec.layers.begin(), spec.layers.begin() + static_cast<long>(i));
    const ionread::Params sub_p(params.begin(), params.begin() + static_cast<long>(i));
    acts.push_back(ionread::forward(sub, sub_p, x));
  }
  return acts;
}

inline bool margins_ok(const ionread::NetworkSpec& spec, const ionread::Params& params,
                       const Batch& batch) {
  using ionread::LayerDesc;
  using ionread::LayerKind;
  const auto ext = spec.extents();
  for (std::size_t s = 0; s < batch.inputs.size(); ++s) {
    const auto acts = prefix_activations(spec, params, batch.inputs[s]);
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
      const LayerDesc& l = spec.layers[li];
      // activation entering layer li
      const std::vector<double>& in = li == 0 ? batch.inputs[s] : acts[li - 1];
      if (l.kind == LayerKind::Relu) {
        for (double v : in)
          if (std::abs(v) < kMargin) return false;
      } else if (l.kind == LayerKind::MaxPool) {
        const int w_in = ext[li].width;
        for (int c = 0; c < ext[li].channels; ++c)
          for (int p = 0; p + l.pool <= w_in; p += l.pool) {
            double top = -1e300, second = -1e300;
            for (int q = 0; q < l.pool; ++q) {
              const double v = in[static_cast<std::size_t>(c) * w_in + p + q];
              if (v > top) {
                second = top;
                top = v;
              } else if (v > second) {
                second = v;
              }
            }
            // a window of hard zeros (dead relus ahead of the pool) stays
            // constant under perturbation, so an exact tie there is smooth
            if (top == 0.0 && second == 0.0) continue;
            if (l.pool > 1 && top - second < kMargin) return false;
          }
      }
    }
    const std::vector<double>& y = acts.back();
    for (std::size_t k = 0; k < y.size(); ++k)
      if (std::abs(y[k] - batch.targets[s][k]) < kMargin) return false;
  }
  return true;
}

inline double batch_loss(const ionread::NetworkSpec& spec, const ionread::Params& params,
                         const Batch& batch) {
  double loss = 0.0;
  for (std::size_t s = 0; s < batch.inputs.size(); ++s)
    loss += ionread::l1_loss(ionread::forward(spec, params, batch.inputs[s]), batch.targets[s]);
  return loss;
}

inline ionread::NetworkSpec random_spec(ionread::Rng& rng, int family) {
  using ionread::LayerDesc;
  ionread::NetworkSpec s;
  switch (family) {
    case 0: {  // logistic
      const int n = 3 + static_cast<int>(rng.bounded(8));
      s.input_width = n;
      s.layers = {LayerDesc::dense(n, 2)};
      break;
    }
    case 1: {  // dense-relu-dense
      const int n = 4 + static_cast<int>(rng.bounded(7));
      const int h = 3 + static_cast<int>(rng.bounded(6));
      s.input_width = n;
      s.layers = {LayerDesc::dense(n, h), LayerDesc::relu(), LayerDesc::dense(h, 2)};
      break;
    }
    case 2: {  // conv relu pool flatten dense
      const int n = 2 * (3 + static_cast<int>(rng.bounded(4)));
      const int c = 2 + static_cast<int>(rng.bounded(3));
      const int k = rng.bernoulli(0.5) ? 3 : 5;
      s.input_width = n;
      s.layers = {LayerDesc::conv1d(1, c, k), LayerDesc::relu(), LayerDesc::maxpool(2),
                  LayerDesc::flatten(), LayerDesc::dense(c * n / 2, 2)};
      break;
    }
    case 3: {  // two conv stages
      const int n = 4 * (2 + static_cast<int>(rng.bounded(2)));
      const int c1 = 2 + static_cast<int>(rng.bounded(2));
      const int c2 = 2 + static_cast<int>(rng.bounded(3));
      const int k = rng.bernoulli(0.5) ? 3 : 5;
      s.input_width = n;
      s.layers = {LayerDesc::conv1d(1, c1, 3),  LayerDesc::relu(), LayerDesc::maxpool(2),
                  LayerDesc::conv1d(c1, c2, k), LayerDesc::relu(), LayerDesc::maxpool(2),
                  LayerDesc::flatten(),         LayerDesc::dense(c2 * n / 4, 2)};
      break;
    }
    case 4: {  // conv without relu (pure linear conv gradient)
      const int n = 4 + static_cast<int>(rng.bounded(6));
      const int c = 2 + static_cast<int>(rng.bounded(3));
      s.input_width = n;
      s.layers = {LayerDesc::conv1d(1, c, 3), LayerDesc::flatten(), LayerDesc::dense(c * n, 2)};
      break;
    }
    default: {  // pool on the raw input, then a small mlp
      const int n = 2 * (3 + static_cast<int>(rng.bounded(5)));
      const int h = 3 + static_cast<int>(rng.bounded(5));
      s.input_width = n;
      s.layers = {LayerDesc::maxpool(2), LayerDesc::dense(n / 2, h), LayerDesc::relu(),
                  LayerDesc::dense(h, 2)};
      break;
    }
  }
  s.validate();
  return s;
}

inline Batch random_batch(ionread::Rng& rng, int input_width) {
  Batch b;
  const int n_samples = 1 + static_cast<int>(rng.bounded(3));
  for (int s = 0; s < n_samples; ++s) {
    std::vector<double> x(static_cast<std::size_t>(input_width));
    for (double& v : x) v = rng.uniform(-2.0, 2.0);
    b.inputs.push_back(std::move(x));
    b.targets.push_back({rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)});
  }
  return b;
}

inline double max_rel_error(const ionread::NetworkSpec& spec, ionread::Params params,
                            const Batch& batch, const ionread::Params& analytic) {
  double worst = 0.0;
  for (std::size_t li = 0; li < params.size(); ++li) {
    auto probe = [&](std::vector<double>& vals, const std::vector<double>& grad) {
      for (std::size_t i = 0; i < vals.size(); ++i) {
        const double keep = vals[i];
        vals[i] = keep + kEps;
        const double up = batch_loss(spec, params, batch);
        vals[i] = keep - kEps;
        const double down = batch_loss(spec, params, batch);
        vals[i] = keep;
        const double numeric = (up - down) / (2.0 * kEps);
        const double denom = std::max({std::abs(grad[i]), std::abs(numeric), 1e-5});
        worst = std::max(worst, std::abs(grad[i] - numeric) / denom);
      }
    };
    probe(params[li].weight.data, analytic[li].weight.data);
    probe(params[li].bias.data, analytic[li].bias.data);
  }
  return worst;
}

struct ConfigResult {
  int config = 0;
  bool batch_found = false;
  double analytic_loss = 0.0;
  double direct_loss = 0.0;
  double rel_error = 0.0;
};

/// One deterministic config per index: random architecture (six families in
/// rotation), Glorot parameters, and a margin-clean random batch.
inline ConfigResult run_config(int cfg) {
  using ionread::derive_seed;
  ConfigResult out;
  out.config = cfg;
  ionread::Rng rng(derive_seed(kSuiteSeed, static_cast<std::uint64_t>(cfg)));
  const ionread::NetworkSpec spec = random_spec(rng, cfg % 6);
  const ionread::Params params =
      ionread::init_params(spec, derive_seed(kSuiteSeed, 100u + static_cast<unsigned>(cfg)));

  Batch batch;
  for (int attempt = 0; attempt < 600 && !out.batch_found; ++attempt) {
    ionread::Rng draw(derive_seed(kSuiteSeed ^ 0x5a5a5a5aull,
                                  static_cast<std::uint64_t>(cfg) * 1000 + attempt));
    batch = random_batch(draw, spec.input_width);
    out.batch_found = margins_ok(spec, params, batch);
  }
  if (!out.batch_found) return out;

  ionread::Params analytic = ionread::zero_like(params);
  out.analytic_loss =
      ionread::l1_batch_gradient(spec, params, batch.inputs, batch.targets, analytic);
  out.direct_loss = batch_loss(spec, params, batch);
  out.rel_error = max_rel_error(spec, params, batch, analytic);
  return out;
}

inline std::vector<ConfigResult> run_suite(int n_configs) {
  std::vector<ConfigResult> results;
  for (int cfg = 0; cfg < n_configs; ++cfg) results.push_back(run_config(cfg));
  return results;
}

}  // namespace gradcheck
