#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <unistd.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "tridetect/binary_io.hpp"
#include "tridetect/errors.hpp"
#include "tridetect/model.hpp"

using namespace tridetect;

namespace {

TriarchyModel small_model(std::mt19937_64& rng, std::size_t in, std::size_t h1, std::size_t h2,
                          std::size_t k) {
  auto layer = [&](std::size_t a, std::size_t b) {
    DenseLayer l{oracle::random_matrix(a, b, rng, 0.7), Vector(b)};
    std::normal_distribution<double> n(0.0, 0.3);
    for (double& v : l.bias) v = n(rng);
    return l;
  };
  return TriarchyModel({layer(in, h1), layer(h1, h2), layer(h2, 1 + k)});
}

std::filesystem::path temp_path(const char* name) {
  return std::filesystem::temp_directory_path() /
         (std::string("tridetect_model_") + std::to_string(::getpid()) + name);
}

}  // namespace

TEST_CASE("init is deterministic with zero biases and He variance") {
  const auto a = init_model(1024, 1024);
  const auto b = init_model(1024, 1024);
  CHECK(a == b);
  CHECK(encode_model(a) == encode_model(b));
  CHECK_FALSE(a == init_model(1024, 1025));

  CHECK(a.input_dim() == 1024);
  CHECK(a.output_dim() == 3);
  CHECK(a.layers().size() == 3);
  CHECK(a.layers()[0].fan_out() == 256);
  CHECK(a.layers()[1].fan_out() == 128);

  for (std::uint64_t seed : {0ull, 5ull, 99ull}) {
    const auto small = init_model(8, seed);
    for (const auto& l : small.layers())
      for (double v : l.bias) CHECK(v == 0.0);
  }

  for (const auto& l : a.layers()) {
    const auto w = l.weight.data();
    double mean = 0.0;
    for (double v : w) mean += v;
    mean /= w.size();
    double var = 0.0;
    for (double v : w) var += (v - mean) * (v - mean);
    var /= (w.size() - 1);
    const double target = 2.0 / l.fan_in();
    CHECK(std::abs(var - target) <= 0.2 * target);
  }
}

TEST_CASE("forward trivial cases") {
  TriarchyModel zero({DenseLayer{Matrix(4, 3), Vector(3)}});
  const Matrix z = forward(zero, Matrix(2, 4));
  for (double v : z.data()) CHECK(v == 0.0);

  DenseLayer id{Matrix(5, 3), Vector(3)};
  for (std::size_t i = 0; i < 3; ++i) id.weight(i + 1, i) = 1.0;
  TriarchyModel slice({id});
  const Matrix x{{1, 2, 3, 4, 5}, {-1, -2, -3, -4, -5}};
  const Matrix y = forward(slice, x);
  for (std::size_t r = 0; r < 2; ++r)
    for (std::size_t c = 0; c < 3; ++c) CHECK(y(r, c) == x(r, c + 1));

  CHECK_THROWS_AS(forward(slice, Matrix(2, 4)), ContractViolation);
  CHECK_THROWS_AS(TriarchyModel({DenseLayer{Matrix(4, 2), Vector(2)}}), ContractViolation);
  CHECK_THROWS_AS(TriarchyModel({DenseLayer{Matrix(4, 5), Vector(5)},
                                 DenseLayer{Matrix(4, 3), Vector(3)}}),
                  ContractViolation);
}

TEST_CASE("forward matches straight-line re-implementation") {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 20; ++t) {
    const auto m = small_model(rng, 3 + t % 6, 2 + t % 7, 3 + t % 5, 2 + t % 3);
    const Matrix x = oracle::random_matrix(5, m.input_dim(), rng);
    const Matrix z = forward(m, x);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      const auto ref = oracle::mlp_row(m, {x.row(i).begin(), x.row(i).end()});
      for (std::size_t c = 0; c < ref.size(); ++c)
        CHECK(std::abs(z(i, c) - ref[c]) <= 1e-12 * std::max(1.0, std::abs(ref[c])));
    }
  }
  const auto big = init_model(64, 3);
  const Matrix x = oracle::random_matrix(3, 64, rng);
  const Matrix z = forward(big, x);
  for (std::size_t i = 0; i < 3; ++i) {
    const auto ref = oracle::mlp_row(big, {x.row(i).begin(), x.row(i).end()});
    for (std::size_t c = 0; c < 3; ++c) CHECK(z(i, c) == doctest::Approx(ref[c]).epsilon(1e-12));
  }
}

TEST_CASE("ReLU layers are 1-Lipschitz in max-norm for fixed weights") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int t = 0; t < 200; ++t) {
    const Matrix w = oracle::random_matrix(6, 4, rng);
    Vector bias(4);
    for (double& v : bias) v = n(rng);
    auto layer = [&](const Vector& x) {
      Vector y(4);
      for (std::size_t o = 0; o < 4; ++o) {
        double pre = bias[o];
        for (std::size_t i = 0; i < 6; ++i) pre += x[i] * w(i, o);
        y[o] = std::max(0.0, pre);
      }
      return y;
    };
    Vector x(6), xp(6);
    for (double& v : x) v = n(rng);
    for (std::size_t i = 0; i < 6; ++i) xp[i] = x[i] + 0.1 * n(rng);
    double lin = 0.0;
    for (std::size_t o = 0; o < 4; ++o) {
      double pre = 0.0, prep = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        pre += x[i] * w(i, o);
        prep += xp[i] * w(i, o);
      }
      lin = std::max(lin, std::abs(pre - prep));
    }
    const auto y = layer(x), yp = layer(xp);
    double dy = 0.0;
    for (std::size_t o = 0; o < 4; ++o) dy = std::max(dy, std::abs(y[o] - yp[o]));
    CHECK(dy <= lin + 1e-12);
  }
}

TEST_CASE("binary_logits marginalization") {
  const Matrix b = binary_logits(Matrix{{0, 0, 0}});
  CHECK(b(0, 0) == 0.0);
  CHECK(b(0, 1) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const auto p = softmax_temp(b.row(0), 1.0);
  CHECK(p[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(p[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-15));

  const Matrix dom = binary_logits(Matrix{{5, -100, -100}});
  CHECK(softmax_temp(dom.row(0), 1.0)[0] > 1.0 - 1e-12);

  std::mt19937_64 rng(6);
  for (int t = 0; t < 500; ++t) {
    const Matrix z = oracle::random_matrix(1, 1 + 2 + t % 3, rng, 4.0);
    const auto bin = softmax_temp(binary_logits(z).row(0), 1.0);
    const auto full = oracle::naive_softmax(z.row(0));
    long double fake = 0.0L;
    for (std::size_t k = 1; k < full.size(); ++k) fake += full[k];
    CHECK(std::abs(bin[0] - (double)full[0]) <= 1e-12);
    CHECK(std::abs(bin[1] - (double)fake) <= 1e-12);
  }
}

TEST_CASE("backward base cases") {
  std::mt19937_64 rng(10);
  const auto m = small_model(rng, 4, 5, 3, 2);
  const Matrix x = oracle::random_matrix(6, 4, rng);
  const Gradients g0 = backward(m, x, Matrix(6, 3));
  for (const auto& l : g0.layers) {
    for (double v : l.weight.data()) CHECK(v == 0.0);
    for (double v : l.bias) CHECK(v == 0.0);
  }

  // single scalar linear layer, z = w x + b with three outputs
  TriarchyModel lin({DenseLayer{Matrix{{0.5, -1.0, 2.0}}, Vector{0.1, 0.2, 0.3}}});
  const Gradients g = backward(lin, Matrix{{3.0}}, Matrix{{2.0, -1.0, 0.5}});
  CHECK(g.layers[0].weight(0, 0) == 6.0);
  CHECK(g.layers[0].weight(0, 1) == -3.0);
  CHECK(g.layers[0].weight(0, 2) == 1.5);
  CHECK(g.layers[0].bias[0] == 2.0);

  CHECK_THROWS_AS(backward(m, x, Matrix(5, 3)), ContractViolation);
  CHECK_THROWS_AS(backward(m, x, Matrix(6, 2)), ContractViolation);
}

TEST_CASE("backward matches central differences") {
  std::mt19937_64 rng(12);
  for (int t = 0; t < 20; ++t) {
    auto m = small_model(rng, 2 + t % 7, 2 + t % 5, 3 + t % 6, 2);
    const Matrix x = oracle::random_matrix(4, m.input_dim(), rng);
    const Matrix up = oracle::random_matrix(4, 3, rng);
    const Gradients g = backward(m, x, up);
    auto f = [&] {
      const Matrix z = forward(m, x);
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) s += z.data()[i] * up.data()[i];
      return s;
    };
    for (std::size_t l = 0; l < m.layers().size(); ++l) {
      const auto fw = oracle::central_diff(m.layers()[l].weight.data(), f);
      for (std::size_t i = 0; i < fw.size(); ++i)
        CHECK(oracle::rel_err(g.layers[l].weight.data()[i], fw[i]) <= 1e-4);
      const auto fb = oracle::central_diff(m.layers()[l].bias, f);
      for (std::size_t i = 0; i < fb.size(); ++i)
        CHECK(oracle::rel_err(g.layers[l].bias[i], fb[i]) <= 1e-4);
    }
  }
}

TEST_CASE("checkpoint round trip and error kinds") {
  const auto m = init_model(ModelShape{12, {7, 5}, 3}, 42);
  const auto bytes = encode_model(m);
  CHECK(decode_model(bytes) == m);
  CHECK(bytes[0] == 'T');
  CHECK(bytes[1] == 'D');
  CHECK(bytes[2] == 'M');
  CHECK(bytes[3] == 'D');

  auto message = [](auto&& fn) -> std::string {
    try {
      fn();
    } catch (const std::exception& e) {
      return e.what();
    }
    return "";
  };

  const auto path = temp_path("rt.tdmd");
  save_model(m, path);
  CHECK(load_model(path) == m);
  std::filesystem::remove(path);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(message([&] { decode_model(bad); }).find("magic") != std::string::npos);
  bad = bytes;
  bad[4] = 2;
  CHECK(message([&] { decode_model(bad); }).find("version") != std::string::npos);
  bad = bytes;
  bad.resize(bad.size() - 3);
  CHECK(message([&] { decode_model(bad); }).find("truncated") != std::string::npos);
  bad = bytes;
  bad.push_back(0);
  CHECK(message([&] { decode_model(bad); }).find("trailing") != std::string::npos);
  bad = bytes;
  const double nan = NAN;
  std::memcpy(bad.data() + bad.size() - 8, &nan, 8);
  CHECK(message([&] { decode_model(bad); }).find("non-finite") != std::string::npos);
  CHECK_THROWS(load_model(temp_path("does_not_exist.tdmd")));
}
