#include "cclsc/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

#include "cclsc/errors.hpp"

namespace cclsc {

namespace {

constexpr const char* kMagic = "cclsc-checkpoint";
constexpr int kVersion = 1;

void write_layer(std::ostream& out, const AffineLayer<double>& layer, bool relu) {
  out << "layer " << layer.out_dim() << ' ' << layer.in_dim() << ' ' << (relu ? "relu" : "linear") << '\n';
  for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out << (c ? " " : "") << layer.weight(r, c);
    out << '\n';
  }
  for (Eigen::Index r = 0; r < layer.bias.size(); ++r) out << (r ? " " : "") << layer.bias(r);
  out << '\n';
}

template <typename T>
T expect_value(std::istream& in, const char* what) {
  T v{};
  if (!(in >> v)) throw FormatError(std::string("checkpoint: expected ") + what);
  return v;
}

void expect_word(std::istream& in, const std::string& word) {
  std::string got;
  if (!(in >> got) || got != word) throw FormatError("checkpoint: expected '" + word + "', got '" + got + "'");
}

}  // namespace

void write_checkpoint(std::ostream& out, const Network<double>& net) {
  out << std::setprecision(17);
  out << kMagic << ' ' << kVersion << '\n';
  out << "seed " << net.seed << '\n';
  out << "layers " << net.embedding.size() + 1 << '\n';
  for (const auto& layer : net.embedding) write_layer(out, layer, true);
  write_layer(out, net.classifier, false);
  out << "end\n";
}

Network<double> read_checkpoint(std::istream& in) {
  expect_word(in, kMagic);
  if (expect_value<int>(in, "version") != kVersion) throw FormatError("checkpoint: unsupported version");
  expect_word(in, "seed");
  Network<double> net;
  net.seed = expect_value<std::uint64_t>(in, "seed value");
  expect_word(in, "layers");
  const auto count = expect_value<std::size_t>(in, "layer count");
  if (count < 1) throw FormatError("checkpoint: no layers");

  Eigen::Index prev_out = -1;
  for (std::size_t li = 0; li < count; ++li) {
    expect_word(in, "layer");
    const auto out_dim = expect_value<Eigen::Index>(in, "output dimension");
    const auto in_dim = expect_value<Eigen::Index>(in, "input dimension");
    const auto kind = expect_value<std::string>(in, "activation");
    const bool last = li + 1 == count;
    if (kind != (last ? "linear" : "relu")) throw FormatError("checkpoint: unexpected activation '" + kind + "'");
    if (out_dim < 1 || in_dim < 1) throw FormatError("checkpoint: bad layer dimensions");
    if (prev_out >= 0 && in_dim != prev_out) throw FormatError("checkpoint: layer dimensions do not chain");
    AffineLayer<double> layer;
    layer.weight.resize(out_dim, in_dim);
    layer.bias.resize(out_dim);
    for (Eigen::Index r = 0; r < out_dim; ++r)
      for (Eigen::Index c = 0; c < in_dim; ++c) layer.weight(r, c) = expect_value<double>(in, "weight");
    for (Eigen::Index r = 0; r < out_dim; ++r) layer.bias(r) = expect_value<double>(in, "bias");
    prev_out = out_dim;
    if (last)
      net.classifier = std::move(layer);
    else
      net.embedding.push_back(std::move(layer));
  }
  expect_word(in, "end");
  if (!net.all_finite()) throw FormatError("checkpoint: non-finite parameter");
  return net;
}

void save_checkpoint(const std::string& path, const Network<double>& net) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  write_checkpoint(out, net);
  if (!out) throw IoError("failed writing " + path);
}

Network<double> load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_checkpoint(in);
}

}  // namespace cclsc
