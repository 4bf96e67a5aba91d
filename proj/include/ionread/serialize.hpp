#pragma once

#include <stdexcept>
#include <string>

#include "ionread/baselines.hpp"
#include "ionread/nn.hpp"

namespace ionread {

/// Raised by every loader in this header; messages carry the path and, where
/// it exists, the layer or field the parser was inside.
struct SerializeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SavedNetwork {
  NetworkSpec spec;
  Params params;
  InputNorm norm;
};

/// Text weight file, sectioned per layer: the layer kind and its extents,
/// then `weight <count>` / `bias <count>` blocks of whitespace-separated
/// values in row-major order at 17 significant digits, which makes the
/// save/load cycle bit-exact for IEEE doubles.
void save_network(const std::string& path, const NetworkSpec& spec, const Params& params,
                  const InputNorm& norm = {});
SavedNetwork load_network(const std::string& path);

/// Small key-value files for the classical models.
void save_threshold_model(const std::string& path, const ThresholdModel& model);
ThresholdModel load_threshold_model(const std::string& path);
void save_hmm_model(const std::string& path, const HmmModel& model);
HmmModel load_hmm_model(const std::string& path);

}  // namespace ionread
