#include "tridetect/data.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "tridetect/binary_io.hpp"
#include "tridetect/errors.hpp"
#include "tridetect/rng.hpp"

namespace tridetect {
namespace {

constexpr char kDatasetMagic[4] = {'T', 'D', 'E', 'M'};
constexpr std::uint32_t kDatasetVersion = 1;

bool valid_label_family(std::uint8_t label, std::uint8_t family) {
  if (label == kReal) return family == kUnknownFamily;
  if (label == kFake) return family == kGanLike || family == kDmLike || family == kUnknownFamily;
  return false;
}

Vector orthogonalize(Vector v, const std::vector<Vector>& basis) {
  for (const auto& b : basis) {
    const double dot = std::inner_product(v.begin(), v.end(), b.begin(), 0.0);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= dot * b[i];
  }
  const double norm = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  for (double& x : v) x /= norm;
  return v;
}

}  // namespace

void EmbeddingDataset::push_back(std::span<const float> embedding, std::uint8_t label,
                                 std::uint8_t family) {
  require(embedding.size() == dim_, "EmbeddingDataset: embedding width != dim");
  require(std::all_of(embedding.begin(), embedding.end(),
                      [](float v) { return std::isfinite(v); }),
          "EmbeddingDataset: non-finite embedding value");
  require(valid_label_family(label, family), "EmbeddingDataset: invalid label/family pair");
  values_.insert(values_.end(), embedding.begin(), embedding.end());
  labels_.push_back(label);
  families_.push_back(family);
}

Matrix EmbeddingDataset::rows(std::span<const std::size_t> idx) const {
  Matrix m(idx.size(), dim_);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    require(idx[r] < size(), "EmbeddingDataset::rows: index out of range");
    const auto e = embedding(idx[r]);
    for (std::size_t c = 0; c < dim_; ++c) m(r, c) = e[c];
  }
  return m;
}

Matrix EmbeddingDataset::to_matrix() const {
  std::vector<std::size_t> idx(size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return rows(idx);
}

EmbeddingDataset EmbeddingDataset::subset(std::span<const std::size_t> idx) const {
  EmbeddingDataset out(dim_);
  for (std::size_t i : idx) {
    require(i < size(), "EmbeddingDataset::subset: index out of range");
    out.push_back(embedding(i), labels_[i], families_[i]);
  }
  return out;
}

std::vector<std::uint8_t> encode_dataset(const EmbeddingDataset& ds) {
  io::ByteWriter w;
  w.raw(std::span(reinterpret_cast<const std::uint8_t*>(kDatasetMagic), 4));
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.size()));
  w.u32(static_cast<std::uint32_t>(ds.dim()));
  for (std::size_t i = 0; i < ds.size(); ++i) {
    w.u8(ds.label(i));
    w.u8(ds.family(i));
    for (float v : ds.embedding(i)) w.f32(v);
  }
  return w.take();
}

EmbeddingDataset decode_dataset(std::span<const std::uint8_t> bytes) {
  using K = DatasetError::Kind;
  io::ByteReader r(bytes);
  try {
    const auto magic = r.raw(4);
    if (!std::equal(magic.begin(), magic.end(), kDatasetMagic))
      throw DatasetError(K::kBadMagic, "dataset: bad magic (expected TDEM)");
    if (const auto v = r.u32(); v != kDatasetVersion)
      throw DatasetError(K::kVersion, "dataset: unsupported version " + std::to_string(v));
    const std::uint32_t count = r.u32();
    const std::uint32_t dim = r.u32();
    if (dim == 0) throw DatasetError(K::kInvalidRecord, "dataset: dim must be positive");
    const std::uint64_t record_bytes = 2 + 4ULL * dim;
    if (record_bytes * count > r.remaining())
      throw DatasetError(K::kTruncated, "dataset: header declares " + std::to_string(count) +
                                            " records but the body is shorter");
    EmbeddingDataset ds(dim);
    std::vector<float> row(dim);
    for (std::uint32_t i = 0; i < count; ++i) {
      const std::uint8_t label = r.u8();
      const std::uint8_t family = r.u8();
      for (float& v : row) {
        v = r.f32();
        if (!std::isfinite(v))
          throw DatasetError(K::kNonFinite,
                             "dataset: non-finite value in record " + std::to_string(i));
      }
      if (!valid_label_family(label, family))
        throw DatasetError(K::kInvalidRecord,
                           "dataset: invalid label/family in record " + std::to_string(i));
      ds.push_back(row, label, family);
    }
    if (r.remaining() != 0)
      throw DatasetError(K::kTrailing, "dataset: trailing bytes after last record");
    return ds;
  } catch (const io::Truncated&) {
    throw DatasetError(K::kTruncated, "dataset: truncated");
  }
}

void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path) {
  io::write_file_atomic(path, encode_dataset(ds));
}

EmbeddingDataset read_dataset(const std::filesystem::path& path) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = io::read_file(path);
  } catch (const std::exception& e) {
    throw DatasetError(DatasetError::Kind::kIo, e.what());
  }
  return decode_dataset(bytes);
}

void SyntheticSpec::validate() const {
  require(dim >= 4, "SyntheticSpec: dim must be >= 4 (plane + two family directions)");
  require(separation >= 0.0 && std::isfinite(separation), "SyntheticSpec: bad separation");
  require(coverage_fraction > 0.0 && coverage_fraction <= 1.0,
          "SyntheticSpec: coverage_fraction must be in (0, 1]");
  require(modes >= 1, "SyntheticSpec: need at least one mode");
  require(component_std > 0.0 && gan_spread > 0.0 && dm_spread > 0.0 && ambient_std >= 0.0,
          "SyntheticSpec: spreads must be positive");
}

SyntheticLayout synthetic_layout(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.layout_seed, {0}));
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<Vector> basis;
  for (int b = 0; b < 4; ++b) {
    Vector v(spec.dim);
    for (double& x : v) x = normal(rng);
    basis.push_back(orthogonalize(std::move(v), basis));
  }

  SyntheticLayout layout;
  layout.frame = Matrix(4, spec.dim);
  for (std::size_t b = 0; b < 4; ++b)
    for (std::size_t c = 0; c < spec.dim; ++c) layout.frame(b, c) = basis[b][c];

  const double pi = std::acos(-1.0);
  layout.mode_centers = Matrix(spec.modes, spec.dim);
  layout.mode_weights.resize(spec.modes);
  double wsum = 0.0;
  for (std::size_t m = 0; m < spec.modes; ++m) {
    const double angle = 2.0 * pi * static_cast<double>(m) / static_cast<double>(spec.modes);
    const double u = spec.mode_radius * spec.component_std * std::cos(angle);
    const double v = spec.mode_radius * spec.component_std * std::sin(angle);
    for (std::size_t c = 0; c < spec.dim; ++c)
      layout.mode_centers(m, c) = u * basis[0][c] + v * basis[1][c];
    layout.mode_weights[m] = static_cast<double>(spec.modes - m);
    wsum += layout.mode_weights[m];
  }
  for (double& w : layout.mode_weights) w /= wsum;

  layout.gan_modes = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(spec.coverage_fraction * static_cast<double>(spec.modes))),
      1, spec.modes);
  layout.gan_offset.resize(spec.dim);
  layout.dm_offset.resize(spec.dim);
  const double offset = spec.separation * spec.component_std;
  for (std::size_t c = 0; c < spec.dim; ++c) {
    layout.gan_offset[c] = offset * basis[2][c];
    layout.dm_offset[c] = offset * basis[3][c];
  }
  return layout;
}

EmbeddingDataset make_synthetic(const SyntheticSpec& spec) {
  const SyntheticLayout layout = synthetic_layout(spec);
  std::mt19937_64 rng(derive_seed(spec.seed, {1}));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::discrete_distribution<std::size_t> real_mode(layout.mode_weights.begin(),
                                                    layout.mode_weights.end());
  std::discrete_distribution<std::size_t> gan_mode(
      layout.mode_weights.begin(),
      layout.mode_weights.begin() + static_cast<std::ptrdiff_t>(layout.gan_modes));
  std::uniform_int_distribution<std::size_t> any_mode(0, spec.modes - 1);

  EmbeddingDataset ds(spec.dim);
  std::vector<float> row(spec.dim);
  auto emit = [&](std::size_t mode, double spread, const Vector* offset, std::uint8_t label,
                  std::uint8_t family) {
    const double in_plane = spec.component_std * spread;
    const double a = normal(rng) * in_plane;
    const double b = normal(rng) * in_plane;
    for (std::size_t c = 0; c < spec.dim; ++c) {
      double v = layout.mode_centers(mode, c) + a * layout.frame(0, c) + b * layout.frame(1, c) +
                 normal(rng) * in_plane * spec.ambient_std;
      if (offset) v += (*offset)[c];
      row[c] = static_cast<float>(v);
    }
    ds.push_back(row, label, family);
  };

  for (std::size_t i = 0; i < spec.n_real; ++i)
    emit(real_mode(rng), 1.0, nullptr, kReal, kUnknownFamily);
  for (std::size_t i = 0; i < spec.n_fake_gan; ++i)
    emit(gan_mode(rng), spec.gan_spread, &layout.gan_offset, kFake, kGanLike);
  for (std::size_t i = 0; i < spec.n_fake_dm; ++i)
    emit(any_mode(rng), spec.dm_spread, &layout.dm_offset, kFake, kDmLike);
  return ds;
}

Matrix augment_view(const Matrix& x, double strength, std::uint64_t seed) {
  require(strength >= 0.0, "augment_view: strength must be nonnegative");
  if (strength == 0.0 || x.rows() == 0) return x;
  const Vector mean = [&] {
    Vector m = col_sums(x);
    for (double& v : m) v /= static_cast<double>(x.rows());
    return m;
  }();
  Vector sd(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double d = x(i, c) - mean[c];
      sd[c] += d * d;
    }
  for (double& s : sd) s = std::sqrt(s / static_cast<double>(x.rows()));

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out(i, c) += strength * sd[c] * normal(rng);
  return out;
}

std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t epoch_seed, std::uint64_t epoch) {
  require(batch_size >= 2, "batches: batch_size must be >= 2");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(epoch_seed, {epoch}));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t end = std::min(n, start + batch_size);
    out.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                     order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return out;
}

Split split_dataset(const EmbeddingDataset& ds, double test_fraction, std::uint64_t seed) {
  require(test_fraction >= 0.0 && test_fraction < 1.0, "split_dataset: fraction in [0, 1)");
  std::map<std::pair<std::uint8_t, std::uint8_t>, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < ds.size(); ++i) groups[{ds.label(i), ds.family(i)}].push_back(i);
  std::mt19937_64 rng(derive_seed(seed, {0x5311}));
  std::vector<std::size_t> train, test;
  for (auto& [key, idx] : groups) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n_test = static_cast<std::size_t>(
        std::llround(test_fraction * static_cast<double>(idx.size())));
    test.insert(test.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    train.insert(train.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {ds.subset(train), ds.subset(test)};
}

}  // namespace tridetect
