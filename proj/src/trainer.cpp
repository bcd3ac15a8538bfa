#include "tridetect/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>

#include "tridetect/errors.hpp"
#include "tridetect/rng.hpp"

namespace tridetect {
namespace {

std::string num(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// Scatter a (F x K) cluster-logit gradient into rows `fakes`, columns 1..K.
void scatter_cluster_grad(Matrix& dz, std::span<const std::size_t> fakes, const Matrix& g,
                          double scale) {
  for (std::size_t r = 0; r < fakes.size(); ++r)
    for (std::size_t c = 0; c < g.cols(); ++c) dz(fakes[r], c + 1) += scale * g(r, c);
}

void add_scaled(Matrix& dst, const Matrix& src, double scale) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += scale * src.data()[i];
}

void accumulate(LossReport& acc, const LossReport& r) {
  acc.binary += r.binary;
  acc.assignment += r.assignment;
  acc.consistency += r.consistency;
  acc.cluster += r.cluster;
  acc.total += r.total;
}

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 1, "TrainConfig: epochs must be >= 1");
  require(batch_size >= 2, "TrainConfig: batch_size must be >= 2");
  require(lr > 0.0, "TrainConfig: lr must be positive");
  require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
          "TrainConfig: adam betas must be in [0, 1)");
  require(adam_eps > 0.0, "TrainConfig: adam_eps must be positive");
  require(weight_decay >= 0.0, "TrainConfig: weight_decay must be nonnegative");
  require(augment_strength >= 0.0, "TrainConfig: augment_strength must be nonnegative");
  require(clusters >= 2, "TrainConfig: need at least two fake clusters");
  require(sinkhorn.epsilon > 0.0 && sinkhorn.iterations >= 1, "TrainConfig: bad sinkhorn config");
  loss.validate();
}

std::string config_text(const TrainConfig& cfg) {
  std::string hidden;
  for (std::size_t i = 0; i < cfg.hidden.size(); ++i)
    hidden += (i ? "," : "") + std::to_string(cfg.hidden[i]);
  std::string out;
  auto kv = [&](const char* k, const std::string& v) { out += std::string(k) + " = " + v + "\n"; };
  kv("epochs", std::to_string(cfg.epochs));
  kv("batch-size", std::to_string(cfg.batch_size));
  kv("lr", num(cfg.lr));
  kv("adam-beta1", num(cfg.adam_beta1));
  kv("adam-beta2", num(cfg.adam_beta2));
  kv("adam-eps", num(cfg.adam_eps));
  kv("weight-decay", num(cfg.weight_decay));
  kv("beta", num(cfg.loss.beta));
  kv("omega1", num(cfg.loss.omega1));
  kv("omega2", num(cfg.loss.omega2));
  kv("tau", num(cfg.loss.tau));
  kv("epsilon", num(cfg.sinkhorn.epsilon));
  kv("sinkhorn-iters", std::to_string(cfg.sinkhorn.iterations));
  kv("augment-strength", num(cfg.augment_strength));
  kv("seed", std::to_string(cfg.seed));
  kv("clusters", std::to_string(cfg.clusters));
  kv("hidden", hidden);
  kv("detach-consistency", cfg.detach_consistency ? "true" : "false");
  return out;
}

TrainState init_state(std::size_t input_dim, const TrainConfig& cfg) {
  cfg.validate();
  ModelShape shape{input_dim, cfg.hidden, cfg.clusters};
  TrainState s;
  s.model = init_model(shape, cfg.seed);
  s.first_moment = Gradients::zeros_like(s.model);
  s.second_moment = Gradients::zeros_like(s.model);
  return s;
}

void adam_step(TrainState& state, const Gradients& grads, const TrainConfig& cfg) {
  auto& layers = state.model.layers();
  require(grads.layers.size() == layers.size(), "adam_step: gradient layout mismatch");
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.adam_beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.adam_beta2, t);
  const double shrink = 1.0 - cfg.lr * cfg.weight_decay;

  auto update = [&](std::span<double> param, std::span<const double> g, std::span<double> m,
                    std::span<double> v) {
    require(param.size() == g.size(), "adam_step: gradient shape mismatch");
    for (std::size_t i = 0; i < param.size(); ++i) {
      m[i] = cfg.adam_beta1 * m[i] + (1.0 - cfg.adam_beta1) * g[i];
      v[i] = cfg.adam_beta2 * v[i] + (1.0 - cfg.adam_beta2) * g[i] * g[i];
      const double step = (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg.adam_eps);
      param[i] = param[i] * shrink - cfg.lr * step;
    }
  };
  for (std::size_t l = 0; l < layers.size(); ++l) {
    update(layers[l].weight.data(), grads.layers[l].weight.data(),
           state.first_moment.layers[l].weight.data(), state.second_moment.layers[l].weight.data());
    update(layers[l].bias, grads.layers[l].bias, state.first_moment.layers[l].bias,
           state.second_moment.layers[l].bias);
  }
}

BatchObjective batch_objective(const TriarchyModel& model, const Matrix& view1,
                               const Matrix& view2, std::span<const std::uint8_t> labels,
                               const TrainConfig& cfg) {
  require(view1.rows() == view2.rows() && view1.cols() == view2.cols(),
          "batch_objective: views differ in shape");
  const auto trace1 = forward_trace(model, view1);
  const auto trace2 = forward_trace(model, view2);
  const Matrix& z1 = trace1.logits();
  const Matrix& z2 = trace2.logits();
  const std::size_t k = model.clusters();
  const auto& w = cfg.loss;

  const BinaryLoss bin = binary_loss(z1, labels);
  Matrix dz1(z1.rows(), z1.cols());
  Matrix dz2(z2.rows(), z2.cols());
  add_scaled(dz1, bin.grad, w.beta);

  std::vector<std::size_t> fakes;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] == kFake) fakes.push_back(i);

  double assignment = 0.0, consistency = 0.0;
  if (!fakes.empty()) {
    const Matrix f1 = gather(z1, fakes, 1, 1 + k);
    const Matrix f2 = gather(z2, fakes, 1, 1 + k);
    const AssignmentMatrix q1 = sinkhorn(f1, cfg.sinkhorn);
    const AssignmentMatrix q2 = sinkhorn(f2, cfg.sinkhorn);

    const AssignmentLoss al = assignment_loss(f1, f2, q1, q2, w.tau);
    assignment = al.value;
    const double a_scale = (1.0 - w.beta) * w.omega1;
    scatter_cluster_grad(dz1, fakes, al.grad_view1, a_scale);
    scatter_cluster_grad(dz2, fakes, al.grad_view2, a_scale);

    consistency = consistency_loss(q1, q2);
    const double c_scale = (1.0 - w.beta) * w.omega2;
    if (!cfg.detach_consistency && c_scale != 0.0) {
      const ConsistencyGrad cg = consistency_grad(q1, q2);
      scatter_cluster_grad(dz1, fakes, sinkhorn_vjp(f1, cfg.sinkhorn, cg.d_q), c_scale);
      scatter_cluster_grad(dz2, fakes, sinkhorn_vjp(f2, cfg.sinkhorn, cg.d_q2), c_scale);
    }
  }

  BatchObjective out;
  out.loss = total_loss(bin.value, assignment, consistency, w);
  out.fakes = fakes.size();
  out.grads = backward(model, trace1, dz1);
  out.grads.add(backward(model, trace2, dz2));
  return out;
}

TrainState train(const EmbeddingDataset& ds, const TrainConfig& cfg,
                 const EmbeddingDataset* paired_views, const EpochCallback& on_epoch,
                 const TriarchyModel* initial) {
  require(!ds.empty(), "train: empty dataset");
  if (paired_views)
    require(paired_views->size() == ds.size() && paired_views->dim() == ds.dim(),
            "train: paired views must match dataset count and dim");
  TrainState state = init_state(ds.dim(), cfg);
  if (initial) {
    require(initial->input_dim() == ds.dim(), "train: initial model input_dim does not match dataset dim");
    const TriarchyModel& fresh = state.model;
    bool same_shape = initial->layers().size() == fresh.layers().size();
    for (std::size_t l = 0; same_shape && l < fresh.layers().size(); ++l)
      same_shape = initial->layers()[l].fan_out() == fresh.layers()[l].fan_out();
    require(same_shape, "train: initial model shape does not match hidden/clusters config");
    state.model = *initial;
  }
  const std::uint64_t shuffle_seed = derive_seed(cfg.seed, {1});

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    LossReport sum;
    std::size_t n_batches = 0;
    for (const auto& idx : batches(ds.size(), cfg.batch_size, shuffle_seed,
                                   static_cast<std::uint64_t>(epoch))) {
      const Matrix x1 = ds.rows(idx);
      const Matrix x2 =
          paired_views ? paired_views->rows(idx)
                       : augment_view(x1, cfg.augment_strength,
                                      derive_seed(cfg.seed, {2, static_cast<std::uint64_t>(state.step)}));
      std::vector<std::uint8_t> labels(idx.size());
      for (std::size_t i = 0; i < idx.size(); ++i) labels[i] = ds.label(idx[i]);

      BatchObjective obj;
      try {
        obj = batch_objective(state.model, x1, x2, labels, cfg);
      } catch (const ContractViolation& e) {
        throw TrainingAborted(state.step + 1, e.what());
      }
      if (!std::isfinite(obj.loss.total)) throw TrainingAborted(state.step + 1, "non-finite loss");
      if (!obj.grads.finite()) throw TrainingAborted(state.step + 1, "non-finite gradient");
      adam_step(state, obj.grads, cfg);
      if (!state.model.finite()) throw TrainingAborted(state.step, "non-finite parameters");

      state.history.push_back({state.step, epoch, obj.loss});
      accumulate(sum, obj.loss);
      ++n_batches;
    }
    const double inv = 1.0 / static_cast<double>(n_batches);
    EpochSummary es{epoch, {sum.binary * inv, sum.assignment * inv, sum.consistency * inv,
                            sum.cluster * inv, sum.total * inv},
                    minority_share(state.model, ds)};
    state.epochs.push_back(es);
    if (on_epoch) on_epoch(state);
  }
  return state;
}

EvalResult evaluate(const TriarchyModel& model, const EmbeddingDataset& ds) {
  require(ds.dim() == model.input_dim(), "evaluate: dataset dim does not match model");
  EvalResult r;
  r.scores.resize(ds.size());
  r.cluster.resize(ds.size());
  constexpr std::size_t kChunk = 1024;
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < ds.size(); start += kChunk) {
    const std::size_t end = std::min(ds.size(), start + kChunk);
    idx.clear();
    for (std::size_t i = start; i < end; ++i) idx.push_back(i);
    const Matrix z = forward(model, ds.rows(idx));
    const Matrix b = binary_logits(z);
    for (std::size_t r_ = 0; r_ < idx.size(); ++r_) {
      const std::size_t i = idx[r_];
      const double p_fake = softmax_temp(b.row(r_), 1.0)[1];
      r.scores[i] = p_fake;
      if (ds.label(i) == kFake || p_fake >= 0.5) {
        const auto row = z.row(r_);
        r.cluster[i] = static_cast<int>(std::max_element(row.begin() + 1, row.end()) - row.begin() - 1);
      }
    }
  }
  return r;
}

std::vector<ScoredSample> scored_samples(const EmbeddingDataset& ds, const EvalResult& r) {
  require(r.scores.size() == ds.size(), "scored_samples: size mismatch");
  std::vector<ScoredSample> out(ds.size());
  for (std::size_t i = 0; i < ds.size(); ++i)
    out[i] = {r.scores[i], ds.label(i), ds.family(i), r.cluster[i]};
  return out;
}

double minority_share(const TriarchyModel& model, const EmbeddingDataset& ds) {
  const EvalResult r = evaluate(model, ds);
  std::vector<std::size_t> counts(model.clusters(), 0);
  std::size_t fakes = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.label(i) != kFake) continue;
    ++fakes;
    ++counts[static_cast<std::size_t>(*r.cluster[i])];
  }
  if (fakes == 0) return 0.0;
  return static_cast<double>(*std::min_element(counts.begin(), counts.end())) /
         static_cast<double>(fakes);
}

std::string history_csv(const TrainState& state) {
  std::string out = "step,binary,assignment,consistency,cluster,total\n";
  for (const auto& h : state.history)
    out += std::to_string(h.step) + "," + num(h.loss.binary) + "," + num(h.loss.assignment) + "," +
           num(h.loss.consistency) + "," + num(h.loss.cluster) + "," + num(h.loss.total) + "\n";
  return out;
}

std::string epochs_csv(const TrainState& state) {
  std::string out = "epoch,binary,assignment,consistency,cluster,total,minority_share\n";
  for (const auto& e : state.epochs)
    out += std::to_string(e.epoch) + "," + num(e.mean.binary) + "," + num(e.mean.assignment) +
           "," + num(e.mean.consistency) + "," + num(e.mean.cluster) + "," + num(e.mean.total) +
           "," + num(e.minority_share) + "\n";
  return out;
}

}  // namespace tridetect
