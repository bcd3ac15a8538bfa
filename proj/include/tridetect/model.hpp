#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "tridetect/matrix.hpp"

namespace tridetect {

// Affine layer y = x W + b, with W stored as (fan_in x fan_out).
struct DenseLayer {
  Matrix weight;
  Vector bias;

  std::size_t fan_in() const noexcept { return weight.rows(); }
  std::size_t fan_out() const noexcept { return weight.cols(); }
  friend bool operator==(const DenseLayer&, const DenseLayer&) = default;
};

// Classifier head: input_dim -> hidden... -> 1 + K, ReLU between layers.
// Output column 0 is the real logit, columns 1..K the fake-cluster logits.
class TriarchyModel {
 public:
  static constexpr std::size_t kDefaultClusters = 2;

  TriarchyModel() = default;
  explicit TriarchyModel(std::vector<DenseLayer> layers);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::size_t clusters() const { return output_dim() - 1; }

  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }

  std::size_t parameter_count() const;
  bool finite() const;

  friend bool operator==(const TriarchyModel&, const TriarchyModel&) = default;

 private:
  std::vector<DenseLayer> layers_;
};

struct ModelShape {
  std::size_t input_dim = 1024;
  std::vector<std::size_t> hidden = {256, 128};
  std::size_t clusters = TriarchyModel::kDefaultClusters;
};

// He-normal weights (variance 2 / fan_in), zero biases. Deterministic in seed.
TriarchyModel init_model(const ModelShape& shape, std::uint64_t seed);
TriarchyModel init_model(std::size_t input_dim, std::uint64_t seed);

// Pre-activations and activations of every layer for one batch.
struct ForwardTrace {
  std::vector<Matrix> inputs;  // inputs[l] feeds layer l; inputs[0] is x
  std::vector<Matrix> pre;     // pre[l] = inputs[l] W_l + b_l
  const Matrix& logits() const { return pre.back(); }
};

ForwardTrace forward_trace(const TriarchyModel& m, const Matrix& x);
Matrix forward(const TriarchyModel& m, const Matrix& x);

// (z_0, log(sum_k exp(z_k))) per row.
Matrix binary_logits(const Matrix& z);

// Gradients share the layer layout of the model.
struct Gradients {
  std::vector<DenseLayer> layers;

  static Gradients zeros_like(const TriarchyModel& m);
  void add(const Gradients& other);
  bool finite() const;
};

Gradients backward(const TriarchyModel& m, const ForwardTrace& trace, const Matrix& upstream);
Gradients backward(const TriarchyModel& m, const Matrix& x, const Matrix& upstream);

// Little-endian "TDMD" checkpoint.
void save_model(const TriarchyModel& m, const std::filesystem::path& path);
TriarchyModel load_model(const std::filesystem::path& path);
std::vector<std::uint8_t> encode_model(const TriarchyModel& m);
TriarchyModel decode_model(std::span<const std::uint8_t> bytes);

}  // namespace tridetect
