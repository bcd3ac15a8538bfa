#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>

#include "tridetect/errors.hpp"
#include "tridetect/trainer.hpp"

using namespace tridetect;

namespace {

EmbeddingDataset small_data(std::uint64_t seed = 3) {
  SyntheticSpec s;
  s.dim = 16;
  s.n_real = 400;
  s.n_fake_gan = s.n_fake_dm = 200;
  s.seed = seed;
  return make_synthetic(s);
}

TrainConfig small_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 64;
  c.hidden = {32, 16};
  return c;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

TEST_CASE("config validation") {
  auto bad = [](auto edit) {
    TrainConfig c;
    edit(c);
    return c;
  };
  CHECK_NOTHROW(TrainConfig{}.validate());
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.epochs = 0; }).validate(), ContractViolation);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.batch_size = 1; }).validate(), ContractViolation);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.lr = 0.0; }).validate(), ContractViolation);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.clusters = 1; }).validate(), ContractViolation);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.loss.beta = -0.1; }).validate(), ContractViolation);
  CHECK_THROWS_AS(bad([](TrainConfig& c) { c.sinkhorn.epsilon = 0.0; }).validate(), ContractViolation);

  const auto text = config_text(TrainConfig{});
  for (const char* key : {"epochs = 5\n", "batch-size = 128\n", "lr = 2e-04\n",
                          "adam-beta2 = 0.95\n", "tau = 0.1\n", "beta = 0.7\n", "epsilon = 0.05\n",
                          "sinkhorn-iters = 3\n", "clusters = 2\n", "hidden = 256,128\n",
                          "seed = 1024\n", "weight-decay = 1e-04\n"})
    CHECK(text.find(key) != std::string::npos);
}

TEST_CASE("zero-gradient step only applies weight decay") {
  TrainConfig cfg = small_config();
  auto state = init_state(8, cfg);
  const TriarchyModel before = state.model;
  adam_step(state, Gradients::zeros_like(state.model), cfg);
  CHECK(state.step == 1);
  const double shrink = 1.0 - cfg.lr * cfg.weight_decay;
  for (std::size_t l = 0; l < before.layers().size(); ++l) {
    const auto& a = before.layers()[l].weight.data();
    const auto& b = state.model.layers()[l].weight.data();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == a[i] * shrink);
  }
}

TEST_CASE("adam step matches a scalar transcription") {
  TrainConfig cfg = small_config();
  cfg.lr = 0.01;
  cfg.weight_decay = 0.1;
  auto state = init_state(4, cfg);
  const double w0 = state.model.layers()[0].weight(0, 0);
  const double g[3] = {0.3, -1.2, 0.05};
  double m = 0, v = 0, w = w0;
  for (int t = 1; t <= 3; ++t) {
    Gradients grads = Gradients::zeros_like(state.model);
    grads.layers[0].weight(0, 0) = g[t - 1];
    adam_step(state, grads, cfg);
    m = 0.9 * m + 0.1 * g[t - 1];
    v = 0.95 * v + 0.05 * g[t - 1] * g[t - 1];
    const double mh = m / (1 - std::pow(0.9, t)), vh = v / (1 - std::pow(0.95, t));
    w = w * (1 - 0.01 * 0.1) - 0.01 * mh / (std::sqrt(vh) + 1e-8);
    CHECK(state.model.layers()[0].weight(0, 0) == doctest::Approx(w).epsilon(1e-14));
  }
}

TEST_CASE("training is deterministic and decreases the loss") {
  const auto ds = small_data();
  const auto cfg = small_config();
  int calls = 0;
  const auto a = train(ds, cfg, nullptr, [&](const TrainState&) { ++calls; });
  const auto b = train(ds, cfg);
  CHECK(calls == cfg.epochs);
  CHECK(encode_model(a.model) == encode_model(b.model));
  CHECK(history_csv(a) == history_csv(b));
  CHECK(epochs_csv(a) == epochs_csv(b));

  const std::size_t per_epoch = (ds.size() + cfg.batch_size - 1) / cfg.batch_size;
  REQUIRE(a.history.size() == per_epoch * cfg.epochs);
  CHECK(a.step == static_cast<long>(a.history.size()));
  for (std::size_t i = 1; i < a.history.size(); ++i) CHECK(a.history[i].step > a.history[i - 1].step);
  for (const auto& h : a.history) {
    CHECK(std::abs(h.loss.cluster - (h.loss.assignment + 0.1 * h.loss.consistency)) <= 1e-12);
    CHECK(std::abs(h.loss.total - (0.7 * h.loss.binary + 0.3 * h.loss.cluster)) <= 1e-12);
  }

  TrainConfig other = cfg;
  other.seed = 77;
  CHECK_FALSE(encode_model(train(ds, other).model) == encode_model(a.model));

  CHECK(history_csv(a).rfind("step,binary,assignment,consistency,cluster,total\n", 0) == 0);
  CHECK(epochs_csv(a).rfind("epoch,", 0) == 0);
}

TEST_CASE("loss decreases at the default operating point") {
  const TrainConfig cfg;
  const auto st = train(make_synthetic(SyntheticSpec{}), cfg);
  std::vector<double> first, last;
  for (const auto& h : st.history) {
    if (h.epoch == 0) first.push_back(h.loss.total);
    if (h.epoch == cfg.epochs - 1) last.push_back(h.loss.total);
  }
  CHECK(median(last) < median(first));
  for (const auto& e : st.epochs) CHECK(e.minority_share >= 0.2);
}

TEST_CASE("binary-only training separates held-out data") {
  SyntheticSpec spec;
  spec.seed = 9;
  const auto split = split_dataset(make_synthetic(spec), 0.2, 1);
  TrainConfig cfg;
  cfg.loss.beta = 1.0;
  cfg.loss.omega1 = 0.0;
  cfg.loss.omega2 = 0.0;
  const auto st = train(split.train, cfg);
  const auto samples = scored_samples(split.test, evaluate(st.model, split.test));
  CHECK(auc(samples) >= 0.99);
}

TEST_CASE("paired views replace augmentation") {
  const auto ds = small_data();
  auto cfg = small_config();
  cfg.epochs = 1;
  const auto paired = train(ds, cfg, &ds);
  const auto jitter = train(ds, cfg);
  CHECK_FALSE(history_csv(paired) == history_csv(jitter));
  cfg.augment_strength = 0.0;
  CHECK(history_csv(train(ds, cfg)) == history_csv(paired));

  const auto shorter = ds.subset(std::vector<std::size_t>{0, 1, 2});
  CHECK_THROWS_AS(train(ds, cfg, &shorter), ContractViolation);
  CHECK_THROWS_AS(train(EmbeddingDataset(16), cfg), ContractViolation);
}

TEST_CASE("non-finite updates abort with the step") {
  const auto ds = small_data();
  auto cfg = small_config();
  cfg.lr = 1e300;
  try {
    train(ds, cfg);
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(e.step() >= 1);
    CHECK(std::string(e.what()).find("step ") == 0);
  }
}

TEST_CASE("evaluation") {
  const auto ds = small_data();
  TriarchyModel zero = init_model(ModelShape{16, {8, 4}, 2}, 1);
  for (auto& l : zero.layers())
    for (double& v : l.weight.data()) v = 0.0;
  const auto r = evaluate(zero, ds);
  for (double s : r.scores) CHECK(s == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(r.cluster[i].has_value());

  auto st = train(ds, small_config());
  const auto base = evaluate(st.model, ds);
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.label(i) == kFake) CHECK(base.cluster[i].has_value());

  auto& out = st.model.layers().back();
  for (std::size_t r_ = 0; r_ < out.weight.rows(); ++r_) std::swap(out.weight(r_, 1), out.weight(r_, 2));
  std::swap(out.bias[1], out.bias[2]);
  const auto swapped = evaluate(st.model, ds);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(swapped.scores[i] == doctest::Approx(base.scores[i]).epsilon(1e-14));
    if (base.cluster[i]) CHECK(*swapped.cluster[i] == 1 - *base.cluster[i]);
  }
  CHECK_THROWS_AS(evaluate(init_model(8, 1), ds), ContractViolation);
}
