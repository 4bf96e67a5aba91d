#pragma once

#include <string>

#include "ionread/physics.hpp"

namespace ionread {

/// Text dataset format, one trajectory per line.
///
///   ionread-dataset v1 n_sub_bins=100 sub_bin_duration=3e-06 fingerprint=0x1234abcd seed=42
///   bright,0,1,0,2,...
///   dark,0,0,...
///
/// The header keeps enough metadata to check a dataset against the physics it
/// claims to come from. Floating fields use 17 significant digits so a
/// save/load round trip is bit exact.
void save_dataset(const LabeledDataset& data, const std::string& path);

/// Throws std::runtime_error with the offending line number on any malformed
/// input. class_balance of the result is the empirical bright fraction (the
/// declared balance is not stored in the file).
LabeledDataset load_dataset(const std::string& path);

}  // namespace ionread
