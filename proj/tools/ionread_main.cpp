// Command-line front end for the readout pipeline: simulate datasets, fit the
// classical baselines, train and evaluate networks, quantize for the embedded
// target, and run the benchmark presets.
//
// Every subcommand prints a "resolved config" block before doing any work.
// The block is itself a valid key=value config file, so any run can be
// reproduced from its own log with --config. Precedence: built-in defaults,
// then --config entries, then --set key=value, then dedicated flags.
//
// Exit codes: 0 success, 1 assertion failure (--assert / --assert-min),
// 2 usage or input errors.
#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "ionread/baselines.hpp"
#include "ionread/bench.hpp"
#include "ionread/dataset_io.hpp"
#include "ionread/fixedpoint.hpp"
#include "ionread/nn.hpp"
#include "ionread/physics.hpp"
#include "ionread/rng.hpp"
#include "ionread/serialize.hpp"
#include "ionread/ttl.hpp"

using namespace ionread;

namespace {

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

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct AssertFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// key=value plumbing

double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double parsed = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw UsageError("config key " + key + ": cannot parse '" + value + "' as a number");
  return parsed;
}

long parse_long(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const long parsed = std::strtol(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw UsageError("config key " + key + ": cannot parse '" + value + "' as an integer");
  return parsed;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "1" || value == "true" || value == "on" || value == "yes") return true;
  if (value == "0" || value == "false" || value == "off" || value == "no") return false;
  throw UsageError("config key " + key + ": cannot parse '" + value + "' as a boolean");
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const unsigned long long parsed = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0')
    throw UsageError("config key " + key + ": cannot parse '" + value + "' as an unsigned integer");
  return parsed;
}

/// Named setters for every key a subcommand understands; anything else is an
/// error, so a typoed config line cannot be silently ignored.
struct KeyTable {
  std::map<std::string, std::function<void(const std::string&)>> handlers;

  void add_double(const std::string& key, double* slot) {
    handlers[key] = [key, slot](const std::string& v) { *slot = parse_double(key, v); };
  }
  void add_long(const std::string& key, long* slot) {
    handlers[key] = [key, slot](const std::string& v) { *slot = parse_long(key, v); };
  }
  void add_int(const std::string& key, int* slot) {
    handlers[key] = [key, slot](const std::string& v) {
      *slot = static_cast<int>(parse_long(key, v));
    };
  }
  void add_bool(const std::string& key, bool* slot) {
    handlers[key] = [key, slot](const std::string& v) { *slot = parse_bool(key, v); };
  }
  void add_u64(const std::string& key, std::uint64_t* slot) {
    handlers[key] = [key, slot](const std::string& v) { *slot = parse_u64(key, v); };
  }
  void add_string(const std::string& key, std::string* slot) {
    handlers[key] = [slot](const std::string& v) { *slot = v; };
  }

  void apply(const std::string& key, const std::string& value, const std::string& source) const {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw UsageError(source + ": unknown config key '" + key + "'");
    it->second(value);
  }
};

struct KeyValue {
  std::string key, value;
};

KeyValue split_kv(const std::string& text, const std::string& source) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0)
    throw UsageError(source + ": expected key=value, got '" + text + "'");
  return {text.substr(0, eq), text.substr(eq + 1)};
}

std::vector<KeyValue> read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file " + path);
  std::vector<KeyValue> entries;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    if (line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t\r");
    entries.push_back(
        split_kv(line.substr(first, last - first + 1), path + ":" + std::to_string(line_no)));
  }
  return entries;
}

// Shared flags each subcommand carries. Dedicated flags are applied after
// --config and --set so the command line always wins.
struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: use hardware parallelism

  CLI::Option* seed_opt = nullptr;
  CLI::Option* threads_opt = nullptr;

  void attach(CLI::App* cmd) {
    cmd->add_option("--config", config_path, "key=value config file");
    cmd->add_option("--set", sets, "extra key=value override (repeatable)");
    seed_opt = cmd->add_option("--seed", seed, "master seed");
    threads_opt = cmd->add_option("--threads", threads, "worker cap (0 = hardware)");
  }

  /// defaults -> config file -> --set. Dedicated flag values are already in
  /// their slots, so the caller re-applies flagged ones afterwards.
  void apply_layers(const KeyTable& table) const {
    if (!config_path.empty())
      for (const KeyValue& kv : read_config_file(config_path))
        table.apply(kv.key, kv.value, config_path);
    for (const std::string& s : sets) {
      const KeyValue kv = split_kv(s, "--set");
      table.apply(kv.key, kv.value, "--set");
    }
  }

  int resolved_threads() const {
    if (threads > 0) return threads;
    return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  }
};

void add_physics_keys(KeyTable& table, PhysicsParams& p) {
  table.add_double("laser_power_uw", &p.laser_power_uw);
  table.add_double("p0_saturation_uw", &p.p0_saturation_uw);
  table.add_double("n0_saturation_rate", &p.n0_saturation_rate);
  table.add_double("dark_rate", &p.dark_rate);
  table.add_double("bright_decay_tau", &p.bright_decay_tau);
  table.add_double("dark_pump_tau_ref", &p.dark_pump_tau_ref);
  table.add_double("reference_power_uw", &p.reference_power_uw);
  table.add_double("sub_bin_duration", &p.sub_bin_duration);
  table.add_int("n_sub_bins", &p.n_sub_bins);
}

std::string physics_config(const PhysicsParams& p) {
  std::string out;
  out += strprintf("laser_power_uw=%.17g\n", p.laser_power_uw);
  out += strprintf("p0_saturation_uw=%.17g\n", p.p0_saturation_uw);
  out += strprintf("n0_saturation_rate=%.17g\n", p.n0_saturation_rate);
  out += strprintf("dark_rate=%.17g\n", p.dark_rate);
  out += strprintf("bright_decay_tau=%.17g\n", p.bright_decay_tau);
  out += strprintf("dark_pump_tau_ref=%.17g\n", p.dark_pump_tau_ref);
  out += strprintf("reference_power_uw=%.17g\n", p.reference_power_uw);
  out += strprintf("sub_bin_duration=%.17g\n", p.sub_bin_duration);
  out += strprintf("n_sub_bins=%d\n", p.n_sub_bins);
  return out;
}

void print_resolved(const std::string& subcommand, const std::string& body) {
  std::cout << "# resolved config (" << subcommand << ")\n" << body << "# end config\n";
}

// ---------------------------------------------------------------------------
// shared helpers

/// Input width an architecture reads for a k-bin window; the dataset is
/// zero-padded up to it (CNN pooling granularity, fixed onboard input).
int arch_feed_width(const std::string& arch, int width) {
  if (arch == "cnn") return std::max(4, (width + 3) / 4 * 4);
  if (arch == "fcnn_onboard") {
    if (width > 10) throw UsageError("arch fcnn_onboard reads at most 10 sub-bins");
    return 10;
  }
  if (arch == "fcnn_wide" || arch == "logistic") return width;
  throw UsageError("unknown arch '" + arch + "' (cnn, fcnn_onboard, fcnn_wide, logistic)");
}

NetworkSpec arch_spec(const std::string& arch, int feed_width) {
  if (arch == "cnn") return cnn_spec(feed_width);
  if (arch == "fcnn_onboard") return fcnn_onboard_spec();
  if (arch == "fcnn_wide") return fcnn_wide_spec(feed_width);
  return logistic_spec(feed_width);
}

std::string model_kind(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open model file " + path);
  std::string line;
  std::getline(in, line);
  if (line.find("kind=threshold") != std::string::npos) return "threshold";
  if (line.find("kind=hmm") != std::string::npos) return "hmm";
  throw UsageError(path + ": not a model file (no kind= header)");
}

struct AssertLog {
  bool enabled = false;
  bool failed = false;

  void check(bool ok, const std::string& what) {
    if (!enabled) return;
    std::cout << (ok ? "ASSERT OK: " : "ASSERT FAIL: ") << what << "\n";
    failed = failed || !ok;
  }
  int exit_code() const { return failed ? 1 : 0; }
};

void write_report(const ExperimentReport& report, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  const std::string path =
      (std::filesystem::path(out_dir) / report_filename(report, "csv")).string();
  write_csv(report, path);
  std::cout << render_table(report) << "wrote " << path << "\n";
}

// ---------------------------------------------------------------------------
// subcommands

int cmd_simulate(const CommonArgs& common, CLI::App* cmd, long n, double balance,
                 std::string out) {
  PhysicsParams params;
  KeyTable table;
  add_physics_keys(table, params);
  table.add_long("n", &n);
  table.add_double("balance", &balance);
  table.add_string("out", &out);
  table.add_u64("seed", const_cast<std::uint64_t*>(&common.seed));
  table.add_int("threads", const_cast<int*>(&common.threads));
  common.apply_layers(table);
  if (cmd->count("--n")) table.apply("n", std::to_string(n), "--n");
  if (out.empty()) throw UsageError("simulate: --out is required");

  print_resolved("simulate", physics_config(params) +
                                 strprintf("n=%ld\nbalance=%.17g\nseed=%" PRIu64
                                           "\nthreads=%d\nout=%s\n",
                                           n, balance, common.seed, common.threads, out.c_str()));

  const LabeledDataset data = generate_dataset(params, static_cast<std::size_t>(n), balance,
                                               common.seed, common.resolved_threads());
  save_dataset(data, out);

  double mean_bright = 0.0, mean_dark = 0.0;
  long n_bright = 0, n_dark = 0;
  for (const PhotonTrajectory& t : data.trajectories) {
    if (t.true_label == StateLabel::Bright) {
      mean_bright += t.total();
      ++n_bright;
    } else {
      mean_dark += t.total();
      ++n_dark;
    }
  }
  if (n_bright > 0) mean_bright /= static_cast<double>(n_bright);
  if (n_dark > 0) mean_dark /= static_cast<double>(n_dark);
  std::cout << strprintf("dataset=%s n=%ld bright_fraction=%.17g\n", out.c_str(), n,
                         data.empirical_bright_fraction());
  std::cout << strprintf("mean_total_bright=%.17g mean_total_dark=%.17g\n", mean_bright,
                         mean_dark);
  return 0;
}

int cmd_fit_threshold(const CommonArgs& common, std::string data_path, std::string out) {
  KeyTable table;
  table.add_string("data", &data_path);
  table.add_string("out", &out);
  common.apply_layers(table);
  if (data_path.empty()) throw UsageError("fit-threshold: --data is required");
  if (out.empty()) throw UsageError("fit-threshold: --out is required");
  print_resolved("fit-threshold", "data=" + data_path + "\nout=" + out + "\n");

  const LabeledDataset data = load_dataset(data_path);
  const ThresholdModel model = fit_threshold(data);
  long correct = 0;
  for (const PhotonTrajectory& t : data.trajectories)
    correct += threshold_classify(t.counts, model) == t.true_label;
  save_threshold_model(out, model);
  std::cout << strprintf("threshold=%d fitted_on=%016" PRIx64 " train_accuracy=%.17g\n",
                         model.threshold, model.fitted_on,
                         static_cast<double>(correct) / static_cast<double>(data.size()));
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_fit_ml(const CommonArgs& common, std::string out) {
  PhysicsParams params;
  KeyTable table;
  add_physics_keys(table, params);
  table.add_string("out", &out);
  common.apply_layers(table);
  if (out.empty()) throw UsageError("fit-ml: --out is required");
  print_resolved("fit-ml", physics_config(params) + "out=" + out + "\n");

  const HmmModel model = HmmModel::from_physics(params);
  save_hmm_model(out, model);
  std::cout << strprintf(
      "lambda_bright=%.17g lambda_dark=%.17g p_bright_to_dark=%.17g p_dark_to_bright=%.17g\n",
      model.lambda_bright, model.lambda_dark, model.p_bright_to_dark, model.p_dark_to_bright);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_train(const CommonArgs& common, CLI::App* cmd, std::string data_path, std::string arch,
              std::string out, TrainConfig cfg) {
  KeyTable table;
  table.add_string("data", &data_path);
  table.add_string("arch", &arch);
  table.add_string("out", &out);
  table.add_double("lr_start", &cfg.lr_start);
  table.add_double("lr_end", &cfg.lr_end);
  table.add_int("batch_size", &cfg.batch_size);
  table.add_long("total_samples", &cfg.total_samples);
  table.add_double("holdout_fraction", &cfg.holdout_fraction);
  table.add_bool("standardize", &cfg.standardize);
  table.add_u64("seed", &cfg.seed);
  table.add_int("threads", &cfg.n_threads);
  common.apply_layers(table);
  if (common.seed_opt->count()) cfg.seed = common.seed;
  if (common.threads_opt->count()) cfg.n_threads = common.threads;
  if (cmd->count("--total-samples") == 0 && cfg.total_samples == 0)
    throw UsageError("train: total_samples must be positive");
  if (data_path.empty()) throw UsageError("train: --data is required");
  if (out.empty()) throw UsageError("train: --out is required");
  if (cfg.n_threads == 0) cfg.n_threads = common.resolved_threads();

  print_resolved(
      "train",
      strprintf("data=%s\narch=%s\nout=%s\nlr_start=%.17g\nlr_end=%.17g\nbatch_size=%d\n"
                "total_samples=%ld\nholdout_fraction=%.17g\nstandardize=%d\nseed=%" PRIu64
                "\nthreads=%d\n",
                data_path.c_str(), arch.c_str(), out.c_str(), cfg.lr_start, cfg.lr_end,
                cfg.batch_size, cfg.total_samples, cfg.holdout_fraction,
                cfg.standardize ? 1 : 0, cfg.seed, cfg.n_threads));

  LabeledDataset data = load_dataset(data_path);
  const int width = data.n_sub_bins;
  const int feed = arch_feed_width(arch, width);
  if (feed != width) data = pad_dataset(data, feed);
  const NetworkSpec spec = arch_spec(arch, feed);
  const TrainResult result = train(spec, data, cfg);
  save_network(out, spec, result.params, result.norm);
  std::cout << strprintf("steps=%ld final_batch_loss=%.17g holdout_accuracy=%.17g\n",
                         result.steps, result.final_batch_loss, result.holdout_accuracy);
  std::cout << "wrote " << out << "\n";
  return 0;
}

int cmd_eval(const CommonArgs& common, CLI::App* cmd, std::string data_path, std::string weights,
             std::string model_path, bool fixed_point, double assert_min) {
  KeyTable table;
  table.add_string("data", &data_path);
  table.add_string("weights", &weights);
  table.add_string("model", &model_path);
  table.add_bool("fixed_point", &fixed_point);
  table.add_double("assert_min", &assert_min);
  common.apply_layers(table);
  const bool has_assert = cmd->count("--assert-min") > 0 || assert_min > 0.0;
  if (data_path.empty()) throw UsageError("eval: --data is required");
  if (weights.empty() == model_path.empty())
    throw UsageError("eval: exactly one of --weights / --model is required");

  print_resolved("eval", strprintf("data=%s\nweights=%s\nmodel=%s\nfixed_point=%d\n"
                                   "assert_min=%.17g\n",
                                   data_path.c_str(), weights.c_str(), model_path.c_str(),
                                   fixed_point ? 1 : 0, assert_min));

  LabeledDataset data = load_dataset(data_path);
  const long n = static_cast<long>(data.size());
  if (n == 0) throw UsageError("eval: dataset is empty");
  double accuracy = 0.0;

  if (!weights.empty()) {
    const SavedNetwork net = load_network(weights);
    if (net.spec.input_width > data.n_sub_bins) data = pad_dataset(data, net.spec.input_width);
    accuracy = evaluate(net.spec, net.params, data, net.norm);
    std::cout << strprintf("accuracy=%.17g n=%ld\n", accuracy, n);
    if (fixed_point) {
      const FixedPointNet qnet = quantize(net.spec, net.params, net.norm);
      long fixed_correct = 0, agree = 0, saturations = 0;
      for (const PhotonTrajectory& t : data.trajectories) {
        const FixedInferResult r = fixed_infer(qnet, t.counts);
        fixed_correct += r.label == t.true_label;
        agree += r.label == predict(net.spec, net.params, t.counts, net.norm);
        saturations += r.saturation_events;
      }
      const double fixed_accuracy = static_cast<double>(fixed_correct) / static_cast<double>(n);
      const double agreement = static_cast<double>(agree) / static_cast<double>(n);
      std::cout << strprintf("fixed_accuracy=%.17g fixed_vs_float_agreement=%.17g "
                             "saturation_events=%ld max_quant_error=%.17g\n",
                             fixed_accuracy, agreement, saturations, qnet.max_quant_error);
      accuracy = fixed_accuracy;
      if (has_assert && agreement < 0.999) {
        std::cout << strprintf("ASSERT FAIL: fixed_vs_float_agreement %.17g < 0.999\n", agreement);
        return 1;
      }
    }
  } else {
    const std::string kind = model_kind(model_path);
    long correct = 0;
    if (kind == "threshold") {
      const ThresholdModel model = load_threshold_model(model_path);
      for (const PhotonTrajectory& t : data.trajectories)
        correct += threshold_classify(t.counts, model) == t.true_label;
    } else {
      const HmmModel model = load_hmm_model(model_path);
      for (const PhotonTrajectory& t : data.trajectories)
        correct += ml_classify(t.counts, model).label == t.true_label;
    }
    accuracy = static_cast<double>(correct) / static_cast<double>(n);
    std::cout << strprintf("accuracy=%.17g n=%ld\n", accuracy, n);
  }

  if (has_assert && accuracy < assert_min) {
    std::cout << strprintf("ASSERT FAIL: accuracy %.17g < %.17g\n", accuracy, assert_min);
    return 1;
  }
  return 0;
}

int cmd_quantize(const CommonArgs& common, std::string weights, std::string out, int count_lo,
                 int count_hi, long trials) {
  KeyTable table;
  table.add_string("weights", &weights);
  table.add_string("out", &out);
  table.add_int("count_lo", &count_lo);
  table.add_int("count_hi", &count_hi);
  table.add_long("trials", &trials);
  common.apply_layers(table);
  if (weights.empty()) throw UsageError("quantize: --weights is required");
  if (out.empty()) throw UsageError("quantize: --out is required");

  print_resolved("quantize",
                 strprintf("weights=%s\nout=%s\ncount_lo=%d\ncount_hi=%d\ntrials=%ld\n",
                           weights.c_str(), out.c_str(), count_lo, count_hi, trials));

  const SavedNetwork net = load_network(weights);
  const FixedPointNet qnet = quantize(net.spec, net.params, net.norm);
  const double bound = activation_abs_bound(qnet, count_lo, count_hi);
  // Register saturation clips at |x| >= 2^15 in Q16.16, so a strictly smaller
  // interval bound certifies a saturation-free network on this input range.
  const bool certified = bound < 32768.0;

  std::string report;
  report += "ionread-quantize-report v1\n";
  report += strprintf("source=%s\n", weights.c_str());
  report += strprintf("layers=%zu params=%ld input_width=%d\n", net.spec.layers.size(),
                      net.spec.param_count(), net.spec.input_width);
  report += strprintf("max_quant_error=%.17g\n", qnet.max_quant_error);
  report += strprintf("activation_abs_bound=%.17g count_range=[%d,%d]\n", bound, count_lo,
                      count_hi);
  report += strprintf("zero_saturation_certified=%d\n", certified ? 1 : 0);
  if (trials > 0) {
    const LatencyStats stats = latency_bench(qnet, trials);
    report += strprintf("latency_median_ns=%.17g latency_p99_ns=%.17g trials=%ld\n",
                        stats.median_ns, stats.p99_ns, stats.n_trials);
  }
  std::ofstream file(out);
  if (!file) throw UsageError("quantize: cannot open " + out + " for writing");
  file << report;
  file.flush();
  if (!file) throw UsageError("quantize: write failed: " + out);
  std::cout << report << "wrote " << out << "\n";
  return 0;
}

int cmd_ttl_roundtrip(const CommonArgs& common, CLI::App* cmd, long n, bool do_assert) {
  PhysicsParams params = PhysicsParams{}.rebinned(30e-6, 10);
  KeyTable table;
  add_physics_keys(table, params);
  table.add_long("n", &n);
  table.add_u64("seed", const_cast<std::uint64_t*>(&common.seed));
  common.apply_layers(table);
  if (cmd->count("--n")) table.apply("n", std::to_string(n), "--n");
  if (n < 1) throw UsageError("ttl-roundtrip: n must be positive");

  // Counter clocking derived from the physics: the divider must tick an
  // integer number of 10 ns periods per sub-bin.
  CounterConfig counter;
  const double sub_ns_d = params.sub_bin_duration * 1e9;
  const auto sub_ns = static_cast<std::int64_t>(std::llround(sub_ns_d));
  if (std::fabs(sub_ns_d - static_cast<double>(sub_ns)) > 1e-6 ||
      sub_ns % counter.tick_ns() != 0)
    throw UsageError("ttl-roundtrip: sub_bin_duration is not a whole number of counter ticks");
  counter.divider_ratio = sub_ns / counter.tick_ns();
  counter.n_sub_bins = params.n_sub_bins;
  counter.gate_duration_ns = sub_ns * params.n_sub_bins;
  counter.validate();

  print_resolved("ttl-roundtrip",
                 physics_config(params) + strprintf("n=%ld\nseed=%" PRIu64 "\n", n, common.seed));

  long mismatches = 0, total_edges = 0;
  std::int64_t max_offset = 0;
  for (long i = 0; i < n; ++i) {
    const StateLabel initial = i % 2 == 0 ? StateLabel::Bright : StateLabel::Dark;
    const PhotonTrajectory traj =
        sample_trajectory(params, initial, derive_seed(common.seed, 2 * i));
    Rng phase_rng(derive_seed(common.seed, 2 * i + 1));
    const auto gate_start = static_cast<std::int64_t>(phase_rng.bounded(1000000));
    const TtlEdgeStream stream = simulate_ttl(traj, params.sub_bin_duration, counter,
                                              derive_seed(common.seed ^ 0x74746cull, i),
                                              gate_start);
    const std::vector<int> counts = divider_counter(stream, counter);
    mismatches += counts != traj.counts;
    total_edges += static_cast<long>(stream.edges_ns.size());
    const std::int64_t t0 =
        (gate_start + counter.tick_ns() - 1) / counter.tick_ns() * counter.tick_ns();
    max_offset = std::max(max_offset, t0 - gate_start);
  }
  std::cout << strprintf("n=%ld total_edges=%ld mismatches=%ld max_boundary_offset_ns=%" PRId64
                         "\n",
                         n, total_edges, mismatches, max_offset);
  if (do_assert) {
    AssertLog log;
    log.enabled = true;
    log.check(mismatches == 0, "every trajectory round-trips exactly");
    log.check(max_offset <= counter.tick_ns(),
              strprintf("bin boundaries within one %" PRId64 " ns tick", counter.tick_ns()));
    return log.exit_code();
  }
  return 0;
}

// --------------------------- bench presets ---------------------------------

double row_accuracy(const ExperimentReport& report, const std::string& condition) {
  for (const ReportRow& row : report.rows)
    if (row.condition == condition) return row.accuracy;
  throw UsageError("bench: report has no condition '" + condition + "'");
}

int bench_table1(const PhysicsParams& params, long n_samples, std::uint64_t seed, int threads,
                 const std::string& out_dir, AssertLog& log) {
  const ExperimentReport report = method_table(params, n_samples, seed, threads);
  write_report(report, out_dir);
  for (const ReportRow& row : report.rows)
    log.check(row.accuracy >= 0.985, row.condition + " accuracy >= 0.985");
  const double thr = row_accuracy(report, "threshold");
  const double ml = row_accuracy(report, "ml");
  const double cnn = row_accuracy(report, "cnn");
  log.check(thr <= ml + 0.001, "threshold <= ml + 0.001");
  log.check(ml <= cnn + 0.001, "ml <= cnn + 0.001");
  return log.exit_code();
}

int bench_fig4(const PhysicsParams& params, long n_samples, std::uint64_t seed, int threads,
               const std::string& out_dir, AssertLog& log) {
  std::vector<int> coarse;
  for (int k = 40; k <= 100; k += 5) coarse.push_back(k);
  const std::vector<int> cnn_bins{45, 50, 55, 60, 65, 70};

  const ExperimentReport thr = fidelity_curve(Method::Threshold, params, coarse, n_samples, seed,
                                              threads);
  write_report(thr, out_dir);
  const ExperimentReport ml = fidelity_curve(Method::MaxLikelihood, params, coarse, n_samples,
                                             seed, threads);
  write_report(ml, out_dir);
  const ExperimentReport cnn = fidelity_curve(Method::Cnn, params, cnn_bins, n_samples, seed,
                                              threads);
  write_report(cnn, out_dir);

  const auto thr_bins = min_bins_for(thr, 0.99);
  const auto cnn_bins_min = min_bins_for(cnn, 0.99);
  std::cout << strprintf("min_bins threshold=%d cnn=%d\n", thr_bins.value_or(-1),
                         cnn_bins_min.value_or(-1));
  log.check(thr_bins.has_value(), "threshold reaches 99% somewhere on the grid");
  log.check(cnn_bins_min.has_value(), "cnn reaches 99% somewhere on the grid");
  if (thr_bins && cnn_bins_min)
    log.check(static_cast<double>(*cnn_bins_min) <= 0.7 * static_cast<double>(*thr_bins),
              strprintf("cnn needs <= 0.7x the threshold window (%d vs %d bins)", *cnn_bins_min,
                        *thr_bins));
  return log.exit_code();
}

int bench_fig6(const PhysicsParams& base, long n_samples, std::uint64_t seed, int threads,
               const std::string& out_dir, AssertLog& log) {
  const PhysicsParams params = base.rebinned(30e-6, 10);
  const std::vector<int> bins{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  for (Method m : {Method::Threshold, Method::MaxLikelihood, Method::FcnnOnboard}) {
    const ExperimentReport report = fidelity_curve(m, params, bins, n_samples, seed, threads);
    write_report(report, out_dir);
    if (m == Method::FcnnOnboard)
      log.check(row_accuracy(report, "bins=10") >= 0.99, "onboard network >= 99% at 10 bins");
  }
  return log.exit_code();
}

int bench_fig7(const PhysicsParams& base, long n_samples, std::uint64_t seed, int threads,
               const std::string& out_dir, AssertLog& log) {
  const PhysicsParams params = base.rebinned(30e-6, 10);
  const std::vector<double> powers{1.26, 2.95, 5.90};
  const std::vector<int> bins{5, 10};
  ExperimentReport thr, fcnn;
  for (Method m : {Method::Threshold, Method::MaxLikelihood, Method::FcnnOnboard}) {
    const ExperimentReport report = power_sweep(m, params, powers, bins, n_samples, seed, threads);
    write_report(report, out_dir);
    if (m == Method::Threshold) thr = report;
    if (m == Method::FcnnOnboard) fcnn = report;
  }
  // At the highest power the integer cut degrades when the window is split
  // finer (state flips dominate), while the trained network holds.
  const double thr5 = row_accuracy(thr, "P=5.90uW bins=5");
  const double thr10 = row_accuracy(thr, "P=5.90uW bins=10");
  const double fcnn5 = row_accuracy(fcnn, "P=5.90uW bins=5");
  const double fcnn10 = row_accuracy(fcnn, "P=5.90uW bins=10");
  log.check(thr10 < thr5, "threshold accuracy drops from 5 to 10 bins at 5.90 uW");
  log.check(fcnn10 >= fcnn5 - 0.002, "onboard network holds within 0.2 pp at 5.90 uW");
  return log.exit_code();
}

int bench_onboard(const PhysicsParams& base, long n_samples, std::uint64_t seed, int threads,
                  const std::string& out_dir, AssertLog& log) {
  const PhysicsParams params = base.rebinned(30e-6, 10);
  const LabeledDataset train_set = generate_dataset(
      params, static_cast<std::size_t>(4 * n_samples), 0.5, derive_seed(seed, 1), threads);
  const LabeledDataset eval_set = generate_dataset(params, static_cast<std::size_t>(n_samples),
                                                   0.5, derive_seed(seed, 2), threads);

  TrainConfig cfg;  // the benchmark trainer settings for the dense nets
  cfg.standardize = true;
  cfg.total_samples = 8000000;
  cfg.seed = derive_seed(seed, 3);
  cfg.n_threads = threads;
  const NetworkSpec spec = fcnn_onboard_spec();
  const TrainResult trained = train(spec, train_set, cfg);

  std::filesystem::create_directories(out_dir);
  const std::string weights_path =
      (std::filesystem::path(out_dir) /
       strprintf("onboard_weights_seed%llu_fp%016llx.txt", static_cast<unsigned long long>(seed),
                 static_cast<unsigned long long>(params.fingerprint())))
          .string();
  save_network(weights_path, spec, trained.params, trained.norm);

  const FixedPointNet qnet = quantize(spec, trained.params, trained.norm);
  long correct = 0, agree = 0, saturations = 0;
  for (const PhotonTrajectory& t : eval_set.trajectories) {
    const FixedInferResult r = fixed_infer(qnet, t.counts);
    correct += r.label == t.true_label;
    agree += r.label == predict(spec, trained.params, t.counts, trained.norm);
    saturations += r.saturation_events;
  }
  const double n = static_cast<double>(eval_set.size());
  const double fixed_accuracy = static_cast<double>(correct) / n;
  const double agreement = static_cast<double>(agree) / n;
  const double bound = activation_abs_bound(qnet, 0, 50);
  const LatencyStats latency = latency_bench(qnet, 100001);

  std::cout << strprintf("holdout_accuracy=%.17g fixed_accuracy=%.17g "
                         "fixed_vs_float_agreement=%.17g\n",
                         trained.holdout_accuracy, fixed_accuracy, agreement);
  std::cout << strprintf("saturation_events=%ld activation_abs_bound=%.17g "
                         "max_quant_error=%.17g\n",
                         saturations, bound, qnet.max_quant_error);
  std::cout << strprintf("latency_median_ns=%.17g latency_p99_ns=%.17g\n", latency.median_ns,
                         latency.p99_ns);
  std::cout << "wrote " << weights_path << "\n";

  log.check(fixed_accuracy >= 0.99, "fixed-point accuracy >= 99%");
  log.check(agreement >= 0.999, "fixed vs float agreement >= 99.9%");
  log.check(saturations == 0, "no register saturation on the held-out set");
  log.check(bound < 32768.0, "interval bound certifies the register range");
  return log.exit_code();
}

int cmd_bench(const CommonArgs& common, CLI::App* cmd, std::string preset, long n_samples,
              std::string out_dir, bool do_assert) {
  PhysicsParams params;
  KeyTable table;
  add_physics_keys(table, params);
  table.add_long("n_samples", &n_samples);
  table.add_string("out_dir", &out_dir);
  table.add_u64("seed", const_cast<std::uint64_t*>(&common.seed));
  table.add_int("threads", const_cast<int*>(&common.threads));
  common.apply_layers(table);
  if (cmd->count("--n-samples")) table.apply("n_samples", std::to_string(n_samples), "flag");
  if (n_samples < 1) throw UsageError("bench: n_samples must be positive");

  print_resolved("bench " + preset,
                 physics_config(params) +
                     strprintf("n_samples=%ld\nout_dir=%s\nseed=%" PRIu64 "\nthreads=%d\n",
                               n_samples, out_dir.c_str(), common.seed, common.threads));

  AssertLog log;
  log.enabled = do_assert;
  const int threads = common.resolved_threads();
  int rc = 0;
  if (preset == "table1")
    rc = bench_table1(params, n_samples, common.seed, threads, out_dir, log);
  else if (preset == "fig4")
    rc = bench_fig4(params, n_samples, common.seed, threads, out_dir, log);
  else if (preset == "fig6")
    rc = bench_fig6(params, n_samples, common.seed, threads, out_dir, log);
  else if (preset == "fig7")
    rc = bench_fig7(params, n_samples, common.seed, threads, out_dir, log);
  else if (preset == "onboard")
    rc = bench_onboard(params, n_samples, common.seed, threads, out_dir, log);
  else
    throw UsageError("bench: unknown preset '" + preset +
                     "' (table1, fig4, fig6, fig7, onboard)");
  return rc;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"trapped-ion qubit readout pipeline"};
  app.require_subcommand(1);

  // simulate
  CLI::App* sim = app.add_subcommand("simulate", "generate a labeled photon-count dataset");
  CommonArgs sim_common;
  sim_common.attach(sim);
  long sim_n = 1000;
  double sim_balance = 0.5;
  std::string sim_out;
  sim->add_option("--n", sim_n, "trajectories to draw");
  sim->add_option("--balance", sim_balance, "bright fraction");
  sim->add_option("--out", sim_out, "dataset file to write");

  // fit-threshold
  CLI::App* fthr = app.add_subcommand("fit-threshold", "fit the integer count cut");
  CommonArgs fthr_common;
  fthr_common.attach(fthr);
  std::string fthr_data, fthr_out;
  fthr->add_option("--data", fthr_data, "training dataset");
  fthr->add_option("--out", fthr_out, "model file to write");

  // fit-ml
  CLI::App* fml = app.add_subcommand("fit-ml", "build the forward model from the physics");
  CommonArgs fml_common;
  fml_common.attach(fml);
  std::string fml_out;
  fml->add_option("--out", fml_out, "model file to write");

  // train
  CLI::App* trn = app.add_subcommand("train", "train a network on a dataset");
  CommonArgs trn_common;
  trn_common.attach(trn);
  std::string trn_data, trn_arch = "cnn", trn_out;
  TrainConfig trn_cfg;
  trn->add_option("--data", trn_data, "training dataset");
  trn->add_option("--arch", trn_arch, "cnn, fcnn_onboard, fcnn_wide or logistic");
  trn->add_option("--out", trn_out, "weight file to write");
  trn->add_option("--total-samples", trn_cfg.total_samples, "training presentations");
  trn->add_flag("--standardize,!--raw", trn_cfg.standardize, "standardize inputs");

  // eval
  CLI::App* evl = app.add_subcommand("eval", "evaluate a model or network on a dataset");
  CommonArgs evl_common;
  evl_common.attach(evl);
  std::string evl_data, evl_weights, evl_model;
  bool evl_fixed = false;
  double evl_min = 0.0;
  evl->add_option("--data", evl_data, "evaluation dataset");
  evl->add_option("--weights", evl_weights, "network weight file");
  evl->add_option("--model", evl_model, "threshold/hmm model file");
  evl->add_flag("--fixed-point", evl_fixed, "also run the Q16.16 emulation");
  evl->add_option("--assert-min", evl_min, "exit 1 when accuracy falls below this");

  // quantize
  CLI::App* qnt = app.add_subcommand("quantize", "Q16.16 conversion report for a weight file");
  CommonArgs qnt_common;
  qnt_common.attach(qnt);
  std::string qnt_weights, qnt_out;
  int qnt_lo = 0, qnt_hi = 50;
  long qnt_trials = 0;
  qnt->add_option("--weights", qnt_weights, "network weight file");
  qnt->add_option("--out", qnt_out, "report file to write");
  qnt->add_option("--count-lo", qnt_lo, "interval bound: smallest per-bin count");
  qnt->add_option("--count-hi", qnt_hi, "interval bound: largest per-bin count");
  qnt->add_option("--trials", qnt_trials, "latency trials (0 skips timing)");

  // ttl-roundtrip
  CLI::App* ttl = app.add_subcommand("ttl-roundtrip",
                                     "edge-stream emulation against the generating counts");
  CommonArgs ttl_common;
  ttl_common.attach(ttl);
  long ttl_n = 1000;
  bool ttl_assert = false;
  ttl->add_option("--n", ttl_n, "trajectories to round-trip");
  ttl->add_flag("--assert", ttl_assert, "exit 1 on any mismatch");

  // bench
  CLI::App* bch = app.add_subcommand("bench", "benchmark presets");
  CommonArgs bch_common;
  bch_common.attach(bch);
  std::string bch_preset;
  long bch_n = 50000;
  std::string bch_out_dir = ".";
  bool bch_assert = false;
  bch->add_option("preset", bch_preset, "table1, fig4, fig6, fig7 or onboard")->required();
  bch->add_option("--n-samples", bch_n, "held-out evaluation size");
  bch->add_option("--out-dir", bch_out_dir, "directory for report files");
  bch->add_flag("--assert", bch_assert, "exit 1 when a preset expectation fails");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(sim)) return cmd_simulate(sim_common, sim, sim_n, sim_balance, sim_out);
    if (app.got_subcommand(fthr)) return cmd_fit_threshold(fthr_common, fthr_data, fthr_out);
    if (app.got_subcommand(fml)) return cmd_fit_ml(fml_common, fml_out);
    if (app.got_subcommand(trn)) return cmd_train(trn_common, trn, trn_data, trn_arch, trn_out,
                                                  trn_cfg);
    if (app.got_subcommand(evl))
      return cmd_eval(evl_common, evl, evl_data, evl_weights, evl_model, evl_fixed, evl_min);
    if (app.got_subcommand(qnt))
      return cmd_quantize(qnt_common, qnt_weights, qnt_out, qnt_lo, qnt_hi, qnt_trials);
    if (app.got_subcommand(ttl)) return cmd_ttl_roundtrip(ttl_common, ttl, ttl_n, ttl_assert);
    if (app.got_subcommand(bch))
      return cmd_bench(bch_common, bch, bch_preset, bch_n, bch_out_dir, bch_assert);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
