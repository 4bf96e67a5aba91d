#include "ionread/serialize.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

namespace ionread {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

/// Token reader that remembers the section it is in so parse errors can say
/// where they happened.
struct TokenReader {
  std::istream& in;
  std::string path;
  std::string section = "header";

  [[noreturn]] void fail(const std::string& why) const {
    throw SerializeError(path + ": " + section + ": " + why);
  }

  std::string next() {
    std::string tok;
    if (!(in >> tok)) fail("unexpected end of file");
    return tok;
  }

  void expect(const std::string& want) {
    const std::string got = next();
    if (got != want) fail("expected '" + want + "', got '" + got + "'");
  }

  /// Reads a `key=value` token and returns the value part.
  std::string kv(const std::string& key) {
    const std::string tok = next();
    const std::string prefix = key + "=";
    if (tok.rfind(prefix, 0) != 0) fail("expected '" + key + "=...', got '" + tok + "'");
    return tok.substr(prefix.size());
  }

  long integer(const std::string& text) {
    char* end = nullptr;
    const long v = std::strtol(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0') fail("'" + text + "' is not an integer");
    return v;
  }

  std::uint64_t unsigned64(const std::string& text) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text.c_str(), &end, 10);
    if (end == text.c_str() || *end != '\0' || text[0] == '-')
      fail("'" + text + "' is not an unsigned integer");
    return v;
  }

  double real() {
    const std::string tok = next();
    char* end = nullptr;
    const double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0') fail("'" + tok + "' is not a number");
    return v;
  }

  void values(std::vector<double>& out, const char* what) {
    const std::string count_tok = next();
    const long n = integer(count_tok);
    if (n != static_cast<long>(out.size()))
      fail(std::string(what) + " count " + count_tok + " does not match the layer shape (" +
           std::to_string(out.size()) + ")");
    for (double& v : out) v = real();
  }

  void done() {
    std::string tok;
    if (in >> tok) fail("trailing content '" + tok + "'");
  }
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw SerializeError(path + ": cannot open for writing");
  return out;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SerializeError(path + ": cannot open for reading");
  return in;
}

void write_values(std::ofstream& out, const char* name, const std::vector<double>& vals) {
  out << name << ' ' << vals.size();
  for (std::size_t i = 0; i < vals.size(); ++i)
    out << (i % 6 == 0 ? '\n' : ' ') << fmt(vals[i]);
  out << '\n';
}

void expect_model_header(TokenReader& r, const std::string& kind) {
  r.expect("ionread-model");
  r.expect("v1");
  const std::string got = r.kv("kind");
  if (got != kind) r.fail("expected kind=" + kind + ", found " + got);
}

}  // namespace

void save_network(const std::string& path, const NetworkSpec& spec, const Params& params,
                  const InputNorm& norm) {
  spec.validate();
  if (params.size() != spec.layers.size())
    throw ShapeError("save_network: parameter set does not match the layer count");
  std::ofstream out = open_out(path);
  out << "ionread-weights v1 layers=" << spec.layers.size() << " input_width="
      << spec.input_width << '\n';
  out << "norm shift=" << fmt(norm.shift) << " scale=" << fmt(norm.scale) << '\n';
  for (std::size_t li = 0; li < spec.layers.size(); ++li) {
    const LayerDesc& l = spec.layers[li];
    out << "layer " << li << ' ' << to_string(l.kind);
    switch (l.kind) {
      case LayerKind::Dense: out << " in=" << l.in << " out=" << l.out; break;
      case LayerKind::Conv1d:
        out << " in=" << l.in << " out=" << l.out << " kernel=" << l.kernel;
        break;
      case LayerKind::MaxPool: out << " pool=" << l.pool; break;
      default: break;
    }
    out << '\n';
    if (l.kind == LayerKind::Dense || l.kind == LayerKind::Conv1d) {
      const Tensor& w = params[li].weight;
      const Tensor& b = params[li].bias;
      const long want_w = l.kind == LayerKind::Dense ? static_cast<long>(l.in) * l.out
                                                     : static_cast<long>(l.in) * l.out * l.kernel;
      if (w.size() != want_w || b.size() != l.out)
        throw ShapeError("save_network: layer " + std::to_string(li) +
                         " parameter shapes do not match the descriptor");
      write_values(out, "weight", w.data);
      write_values(out, "bias", b.data);
    }
  }
  out.flush();
  if (!out) throw SerializeError(path + ": write failed");
}

SavedNetwork load_network(const std::string& path) {
  std::ifstream in = open_in(path);
  TokenReader r{in, path};
  r.expect("ionread-weights");
  r.expect("v1");
  const long n_layers = r.integer(r.kv("layers"));
  if (n_layers < 0) r.fail("negative layer count");
  SavedNetwork net;
  net.spec.input_width = static_cast<int>(r.integer(r.kv("input_width")));

  r.section = "norm";
  r.expect("norm");
  net.norm.shift = std::strtod(r.kv("shift").c_str(), nullptr);
  net.norm.scale = std::strtod(r.kv("scale").c_str(), nullptr);

  net.params.resize(static_cast<std::size_t>(n_layers));
  for (long li = 0; li < n_layers; ++li) {
    r.section = "layer " + std::to_string(li);
    r.expect("layer");
    if (r.integer(r.next()) != li) r.fail("layer records out of order");
    const std::string kind = r.next();
    r.section += " (" + kind + ")";
    LayerDesc desc;
    if (kind == "dense") {
      // sequenced reads: argument evaluation order must not touch the stream
      const int in_w = static_cast<int>(r.integer(r.kv("in")));
      const int out_w = static_cast<int>(r.integer(r.kv("out")));
      desc = LayerDesc::dense(in_w, out_w);
      net.params[li].weight = Tensor({desc.out, desc.in});
      net.params[li].bias = Tensor({desc.out});
    } else if (kind == "conv1d") {
      const int in_ch = static_cast<int>(r.integer(r.kv("in")));
      const int out_ch = static_cast<int>(r.integer(r.kv("out")));
      const int kernel = static_cast<int>(r.integer(r.kv("kernel")));
      desc = LayerDesc::conv1d(in_ch, out_ch, kernel);
      net.params[li].weight = Tensor({out_ch, in_ch, kernel});
      net.params[li].bias = Tensor({out_ch});
    } else if (kind == "relu") {
      desc = LayerDesc::relu();
    } else if (kind == "maxpool") {
      desc = LayerDesc::maxpool(static_cast<int>(r.integer(r.kv("pool"))));
    } else if (kind == "flatten") {
      desc = LayerDesc::flatten();
    } else {
      r.fail("unknown layer kind '" + kind + "'");
    }
    net.spec.layers.push_back(desc);
    if (kind == "dense" || kind == "conv1d") {
      r.expect("weight");
      r.values(net.params[li].weight.data, "weight");
      r.expect("bias");
      r.values(net.params[li].bias.data, "bias");
    }
  }
  r.section = "footer";
  r.done();
  try {
    net.spec.validate();
  } catch (const ShapeError& e) {
    throw SerializeError(path + ": stored layers do not compose: " + e.what());
  }
  return net;
}

void save_threshold_model(const std::string& path, const ThresholdModel& model) {
  std::ofstream out = open_out(path);
  out << "ionread-model v1 kind=threshold\n";
  out << "threshold " << model.threshold << '\n';
  out << "fitted_on " << model.fitted_on << '\n';
  out.flush();
  if (!out) throw SerializeError(path + ": write failed");
}

ThresholdModel load_threshold_model(const std::string& path) {
  std::ifstream in = open_in(path);
  TokenReader r{in, path};
  expect_model_header(r, "threshold");
  ThresholdModel m;
  r.section = "threshold";
  r.expect("threshold");
  m.threshold = static_cast<int>(r.integer(r.next()));
  r.expect("fitted_on");
  m.fitted_on = r.unsigned64(r.next());
  r.done();
  return m;
}

void save_hmm_model(const std::string& path, const HmmModel& model) {
  std::ofstream out = open_out(path);
  out << "ionread-model v1 kind=hmm\n";
  out << "lambda_bright " << fmt(model.lambda_bright) << '\n';
  out << "lambda_dark " << fmt(model.lambda_dark) << '\n';
  out << "p_bright_to_dark " << fmt(model.p_bright_to_dark) << '\n';
  out << "p_dark_to_bright " << fmt(model.p_dark_to_bright) << '\n';
  out << "prior_bright " << fmt(model.prior_bright) << '\n';
  out << "prior_dark " << fmt(model.prior_dark) << '\n';
  out.flush();
  if (!out) throw SerializeError(path + ": write failed");
}

HmmModel load_hmm_model(const std::string& path) {
  std::ifstream in = open_in(path);
  TokenReader r{in, path};
  expect_model_header(r, "hmm");
  HmmModel m;
  auto field = [&](const char* name, double& dst) {
    r.section = name;
    r.expect(name);
    dst = r.real();
  };
  field("lambda_bright", m.lambda_bright);
  field("lambda_dark", m.lambda_dark);
  field("p_bright_to_dark", m.p_bright_to_dark);
  field("p_dark_to_bright", m.p_dark_to_bright);
  field("prior_bright", m.prior_bright);
  field("prior_dark", m.prior_dark);
  r.done();
  try {
    m.validate();
  } catch (const std::invalid_argument& e) {
    throw SerializeError(path + ": stored model is invalid: " + e.what());
  }
  return m;
}

}  // namespace ionread
