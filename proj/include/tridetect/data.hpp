#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "tridetect/matrix.hpp"

namespace tridetect {

enum Label : std::uint8_t { kReal = 0, kFake = 1 };
enum Family : std::uint8_t { kGanLike = 0, kDmLike = 1, kUnknownFamily = 255 };

// Labeled embeddings, stored as f32 rows of width `dim`.
class EmbeddingDataset {
 public:
  EmbeddingDataset() = default;
  explicit EmbeddingDataset(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return labels_.size(); }
  bool empty() const noexcept { return labels_.empty(); }

  // Throws ContractViolation on width mismatch, non-finite values, or an
  // invalid label/family combination.
  void push_back(std::span<const float> embedding, std::uint8_t label, std::uint8_t family);

  std::span<const float> embedding(std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }
  std::uint8_t label(std::size_t i) const noexcept { return labels_[i]; }
  std::uint8_t family(std::size_t i) const noexcept { return families_[i]; }
  std::span<const std::uint8_t> labels() const noexcept { return labels_; }
  std::span<const std::uint8_t> families() const noexcept { return families_; }

  // Promotes rows `idx` (or all rows) to a double matrix.
  Matrix rows(std::span<const std::size_t> idx) const;
  Matrix to_matrix() const;

  EmbeddingDataset subset(std::span<const std::size_t> idx) const;

  friend bool operator==(const EmbeddingDataset&, const EmbeddingDataset&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<float> values_;
  std::vector<std::uint8_t> labels_;
  std::vector<std::uint8_t> families_;
};

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { kIo, kBadMagic, kVersion, kTruncated, kNonFinite, kInvalidRecord, kTrailing };
  DatasetError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// "TDEM" v1, little-endian: magic, version u32, count u32, dim u32, then
// count x [label u8][family u8][dim x f32].
std::vector<std::uint8_t> encode_dataset(const EmbeddingDataset& ds);
EmbeddingDataset decode_dataset(std::span<const std::uint8_t> bytes);
void write_dataset(const EmbeddingDataset& ds, const std::filesystem::path& path);
EmbeddingDataset read_dataset(const std::filesystem::path& path);

struct SyntheticSpec {
  std::size_t dim = 32;
  std::size_t n_real = 2000;
  std::size_t n_fake_gan = 2000;
  std::size_t n_fake_dm = 2000;
  double separation = 6.0;         // family offset norm, in component stds
  double coverage_fraction = 0.5;  // share of real modes the GAN-like family uses
  std::uint64_t seed = 1024;         // sampling
  std::uint64_t layout_seed = 1024;  // geometry: embedding frame and offsets

  std::size_t modes = 8;
  double mode_radius = 3.0;     // mode centers on a circle in the latent plane
  double component_std = 1.0;
  double gan_spread = 0.5;
  double dm_spread = 1.5;
  double ambient_std = 0.25;    // off-plane noise, relative to in-plane noise

  void validate() const;
};

// Geometry shared by all datasets with the same layout_seed and shape fields,
// so train and test sets drawn with different seeds are comparable.
struct SyntheticLayout {
  Matrix mode_centers;          // modes x dim
  Vector mode_weights;          // real mixture weights, descending
  std::size_t gan_modes = 0;    // GAN-like family uses modes [0, gan_modes)
  Vector gan_offset;
  Vector dm_offset;
  Matrix frame;                 // 4 x dim orthonormal: plane u, plane v, gan dir, dm dir
};

SyntheticLayout synthetic_layout(const SyntheticSpec& spec);

// Real samples from all modes; GAN-like from the densest coverage_fraction of
// modes with 0.5x spread; DM-like from all modes with 1.5x spread. Each fake
// family is shifted by its own offset of norm `separation`.
EmbeddingDataset make_synthetic(const SyntheticSpec& spec);

// x + strength * per-dim batch std * N(0, 1). strength 0 returns x.
Matrix augment_view(const Matrix& x, double strength, std::uint64_t seed);

// Shuffled index batches for one epoch; the last short batch is kept.
std::vector<std::vector<std::size_t>> batches(std::size_t n, std::size_t batch_size,
                                              std::uint64_t epoch_seed, std::uint64_t epoch);

// Stratified (by label and family) deterministic split.
struct Split {
  EmbeddingDataset train;
  EmbeddingDataset test;
};
Split split_dataset(const EmbeddingDataset& ds, double test_fraction, std::uint64_t seed);

}  // namespace tridetect
