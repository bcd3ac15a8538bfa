#include "tridetect/model.hpp"

#include <cmath>
#include <random>

#include "tridetect/binary_io.hpp"
#include "tridetect/errors.hpp"

namespace tridetect {
namespace {

constexpr char kModelMagic[4] = {'T', 'D', 'M', 'D'};
constexpr std::uint32_t kModelVersion = 1;

void check_layers(const std::vector<DenseLayer>& layers) {
  require(!layers.empty(), "TriarchyModel: no layers");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    require(layers[l].bias.size() == layers[l].fan_out(), "TriarchyModel: bias size mismatch");
    if (l > 0)
      require(layers[l].fan_in() == layers[l - 1].fan_out(),
              "TriarchyModel: consecutive layer shapes disagree");
  }
  require(layers.back().fan_out() >= 3, "TriarchyModel: need 1 real + at least 2 cluster logits");
}

}  // namespace

TriarchyModel::TriarchyModel(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  check_layers(layers_);
}

std::size_t TriarchyModel::input_dim() const { return layers_.front().fan_in(); }
std::size_t TriarchyModel::output_dim() const { return layers_.back().fan_out(); }

std::size_t TriarchyModel::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
  return n;
}

bool TriarchyModel::finite() const {
  for (const auto& l : layers_)
    if (!all_finite(l.weight.data()) || !all_finite(l.bias)) return false;
  return true;
}

TriarchyModel init_model(const ModelShape& shape, std::uint64_t seed) {
  require(shape.input_dim >= 1, "init_model: input_dim must be >= 1");
  require(shape.clusters >= 2, "init_model: need at least two clusters");
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> dims{shape.input_dim};
  dims.insert(dims.end(), shape.hidden.begin(), shape.hidden.end());
  dims.push_back(1 + shape.clusters);

  std::vector<DenseLayer> layers;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    std::normal_distribution<double> normal(0.0, std::sqrt(2.0 / static_cast<double>(dims[l])));
    DenseLayer layer{Matrix(dims[l], dims[l + 1]), Vector(dims[l + 1], 0.0)};
    for (double& w : layer.weight.data()) w = normal(rng);
    layers.push_back(std::move(layer));
  }
  return TriarchyModel(std::move(layers));
}

TriarchyModel init_model(std::size_t input_dim, std::uint64_t seed) {
  ModelShape shape;
  shape.input_dim = input_dim;
  return init_model(shape, seed);
}

ForwardTrace forward_trace(const TriarchyModel& m, const Matrix& x) {
  require(x.cols() == m.input_dim(), "forward: input width does not match model input_dim");
  ForwardTrace t;
  t.inputs.push_back(x);
  const auto& layers = m.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Matrix z = matmul(t.inputs.back(), layers[l].weight);
    for (std::size_t i = 0; i < z.rows(); ++i) {
      auto r = z.row(i);
      for (std::size_t j = 0; j < r.size(); ++j) r[j] += layers[l].bias[j];
    }
    if (l + 1 < layers.size()) {
      Matrix a = z;
      for (double& v : a.data()) v = v > 0.0 ? v : 0.0;
      t.inputs.push_back(std::move(a));
    }
    t.pre.push_back(std::move(z));
  }
  return t;
}

Matrix forward(const TriarchyModel& m, const Matrix& x) { return forward_trace(m, x).pre.back(); }

Matrix binary_logits(const Matrix& z) {
  require(z.cols() >= 3, "binary_logits: need 1 real + at least 2 cluster logits");
  Matrix out(z.rows(), 2);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    const auto r = z.row(i);
    out(i, 0) = r[0];
    out(i, 1) = log_sum_exp(r.subspan(1));
  }
  return out;
}

Gradients Gradients::zeros_like(const TriarchyModel& m) {
  Gradients g;
  for (const auto& l : m.layers())
    g.layers.push_back({Matrix(l.fan_in(), l.fan_out()), Vector(l.fan_out(), 0.0)});
  return g;
}

void Gradients::add(const Gradients& other) {
  require(other.layers.size() == layers.size(), "Gradients::add: layer count mismatch");
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto dst = layers[l].weight.data();
    auto src = other.layers[l].weight.data();
    require(dst.size() == src.size(), "Gradients::add: shape mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    for (std::size_t i = 0; i < layers[l].bias.size(); ++i)
      layers[l].bias[i] += other.layers[l].bias[i];
  }
}

bool Gradients::finite() const {
  for (const auto& l : layers)
    if (!all_finite(l.weight.data()) || !all_finite(l.bias)) return false;
  return true;
}

Gradients backward(const TriarchyModel& m, const ForwardTrace& trace, const Matrix& upstream) {
  const auto& layers = m.layers();
  require(trace.pre.size() == layers.size(), "backward: trace does not match model depth");
  require(upstream.rows() == trace.logits().rows() && upstream.cols() == m.output_dim(),
          "backward: upstream gradient shape mismatch");
  Gradients g;
  g.layers.resize(layers.size());
  Matrix delta = upstream;
  for (std::size_t l = layers.size(); l-- > 0;) {
    g.layers[l].weight = matmul_at_b(trace.inputs[l], delta);
    g.layers[l].bias = col_sums(delta);
    if (l == 0) break;
    Matrix prev = matmul_a_bt(delta, layers[l].weight);
    const Matrix& pre = trace.pre[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i)
      if (!(pre.data()[i] > 0.0)) prev.data()[i] = 0.0;
    delta = std::move(prev);
  }
  return g;
}

Gradients backward(const TriarchyModel& m, const Matrix& x, const Matrix& upstream) {
  return backward(m, forward_trace(m, x), upstream);
}

std::vector<std::uint8_t> encode_model(const TriarchyModel& m) {
  io::ByteWriter w;
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kModelMagic), 4));
  w.u32(kModelVersion);
  w.u32(static_cast<std::uint32_t>(m.input_dim()));
  w.u32(static_cast<std::uint32_t>(m.layers().size()));
  for (const auto& l : m.layers()) {
    w.u32(static_cast<std::uint32_t>(l.fan_in()));
    w.u32(static_cast<std::uint32_t>(l.fan_out()));
    for (double v : l.weight.data()) w.f64(v);
    for (double v : l.bias) w.f64(v);
  }
  return w.take();
}

TriarchyModel decode_model(std::span<const std::uint8_t> bytes) {
  io::ByteReader r(bytes);
  try {
    auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kModelMagic))
      throw std::runtime_error("checkpoint: bad magic (expected TDMD)");
    if (const auto v = r.u32(); v != kModelVersion)
      throw std::runtime_error("checkpoint: unsupported version " + std::to_string(v));
    const std::uint32_t input_dim = r.u32();
    const std::uint32_t count = r.u32();
    if (count == 0) throw std::runtime_error("checkpoint: no layers");
    std::vector<DenseLayer> layers;
    for (std::uint32_t l = 0; l < count; ++l) {
      const std::uint32_t rows = r.u32();
      const std::uint32_t cols = r.u32();
      // reject absurd sizes before allocating
      if (static_cast<std::uint64_t>(rows) * cols * 8 > r.remaining())
        throw io::Truncated("layer larger than remaining data");
      DenseLayer layer{Matrix(rows, cols), Vector(cols)};
      for (double& v : layer.weight.data()) v = r.f64();
      for (double& v : layer.bias) v = r.f64();
      layers.push_back(std::move(layer));
    }
    if (r.remaining() != 0) throw std::runtime_error("checkpoint: trailing bytes");
    TriarchyModel m(std::move(layers));
    if (m.input_dim() != input_dim)
      throw std::runtime_error("checkpoint: header input_dim disagrees with first layer");
    if (!m.finite()) throw std::runtime_error("checkpoint: non-finite parameters");
    return m;
  } catch (const io::Truncated&) {
    throw std::runtime_error("checkpoint: truncated");
  } catch (const ContractViolation& e) {
    throw std::runtime_error(std::string("checkpoint: ") + e.what());
  }
}

void save_model(const TriarchyModel& m, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_model(m));
}

TriarchyModel load_model(const std::filesystem::path& path) {
  return decode_model(io::read_file(path));
}

}  // namespace tridetect
