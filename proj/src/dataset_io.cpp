#include "ionread/dataset_io.hpp"

#include <cctype>
#include <charconv>
#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ionread {

namespace {

[[noreturn]] void fail(const std::string& path, std::size_t line, const std::string& why) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + why);
}

}  // namespace

void save_dataset(const LabeledDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_dataset: cannot open " + path);
  char header[160];
  std::snprintf(header, sizeof(header),
                "ionread-dataset v1 n_sub_bins=%d sub_bin_duration=%.17g "
                "fingerprint=0x%016" PRIx64 " seed=%" PRIu64,
                data.n_sub_bins, data.sub_bin_duration, data.params_fingerprint, data.seed);
  out << header << '\n';
  for (const auto& traj : data.trajectories) {
    out << to_string(traj.true_label);
    for (int c : traj.counts) out << ',' << c;
    out << '\n';
  }
  if (!out) throw std::runtime_error("save_dataset: write failed for " + path);
}

LabeledDataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_dataset: cannot open " + path);

  std::string line;
  if (!std::getline(in, line)) fail(path, 1, "empty file");

  LabeledDataset data;
  {
    std::istringstream head(line);
    std::string magic, version;
    head >> magic >> version;
    if (magic != "ionread-dataset" || version != "v1")
      fail(path, 1, "not an ionread-dataset v1 header");
    std::string kv;
    while (head >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) fail(path, 1, "malformed header field '" + kv + "'");
      const std::string key = kv.substr(0, eq);
      const std::string val = kv.substr(eq + 1);
      try {
        if (key == "n_sub_bins") {
          data.n_sub_bins = std::stoi(val);
        } else if (key == "sub_bin_duration") {
          data.sub_bin_duration = std::stod(val);
        } else if (key == "fingerprint") {
          data.params_fingerprint = std::stoull(val, nullptr, 16);
        } else if (key == "seed") {
          data.seed = std::stoull(val);
        } else {
          fail(path, 1, "unknown header field '" + key + "'");
        }
      } catch (const std::logic_error&) {
        fail(path, 1, "bad value for header field '" + key + "'");
      }
    }
    if (data.n_sub_bins <= 0) fail(path, 1, "header is missing a positive n_sub_bins");
  }

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    PhotonTrajectory traj;
    traj.params_fingerprint = data.params_fingerprint;
    const auto first_comma = line.find(',');
    if (first_comma == std::string::npos) fail(path, line_no, "expected 'label,counts...'");
    try {
      traj.true_label = state_from_string(line.substr(0, first_comma));
    } catch (const std::invalid_argument& e) {
      fail(path, line_no, e.what());
    }
    traj.counts.reserve(data.n_sub_bins);
    const char* p = line.data() + first_comma;
    const char* end = line.data() + line.size();
    while (p < end) {
      if (*p != ',') fail(path, line_no, "expected ',' between counts");
      ++p;
      int value = 0;
      auto [next, ec] = std::from_chars(p, end, value);
      if (ec != std::errc() || next == p) fail(path, line_no, "malformed count");
      if (value < 0) fail(path, line_no, "negative count");
      traj.counts.push_back(value);
      p = next;
    }
    if (static_cast<int>(traj.counts.size()) != data.n_sub_bins)
      fail(path, line_no,
           "expected " + std::to_string(data.n_sub_bins) + " counts, got " +
               std::to_string(traj.counts.size()));
    data.trajectories.push_back(std::move(traj));
  }
  data.class_balance = data.empirical_bright_fraction();
  return data;
}

}  // namespace ionread
