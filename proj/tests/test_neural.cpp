#include <cmath>
#include <filesystem>
#include <map>

#include "doctest.h"
#include "oracles.hpp"
#include "peatsim/neural.hpp"

using namespace peatsim;
using namespace peatsim::neural;

namespace {

// Finite-difference gradient of f over a network's own parameter buffer.
std::vector<double> numeric_over(std::span<double> params, const std::function<double()>& f) {
  std::vector<double> copy(params.begin(), params.end());
  auto g = oracle::numeric_gradient(copy, [&] {
    std::copy(copy.begin(), copy.end(), params.begin());
    return f();
  });
  std::copy(copy.begin(), copy.end(), params.begin());
  return g;
}

Vector random_vector(std::size_t n, Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Vector v(n);
  for (double& x : v) x = d(rng);
  return v;
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

TEST_CASE("mlp shapes and forward") {
  Rng rng(1);
  Mlp net({3, 5, 2}, false, rng);
  CHECK(net.parameter_count() == 3 * 5 + 5 + 5 * 2 + 2);
  CHECK(net.input_size() == 3);
  CHECK(net.output_size() == 2);
  const Vector x{0.1, -0.2, 0.3};
  Mlp::Cache cache;
  CHECK(net.forward(x) == net.forward(x, cache));
  CHECK(cache.activations.size() == 3);

  // hand-evaluated network: weights are row-major (out x in), then biases
  Mlp tiny({2, 1}, false, rng);
  auto p = tiny.parameters();
  p[0] = 2.0;
  p[1] = -1.0;
  p[2] = 0.5;
  CHECK(tiny.forward(Vector{3.0, 4.0})[0] == doctest::Approx(2.5));
  Mlp squashed({2, 1}, true, rng);
  std::copy(p.begin(), p.end(), squashed.parameters().begin());
  CHECK(squashed.forward(Vector{3.0, 4.0})[0] == doctest::Approx(std::tanh(2.5)));
  CHECK_THROWS_AS(net.forward(Vector{1.0}), DimensionError);
}

TEST_CASE("mlp gradients match finite differences") {
  Rng rng(2);
  for (bool act : {false, true}) {
    for (auto sizes : std::vector<std::vector<int>>{{4, 8, 3}, {31, 64, 64, 10}, {6, 1}}) {
      Mlp net(sizes, act, rng);
      const Vector x = random_vector(sizes.front(), rng);
      const Vector w = random_vector(sizes.back(), rng);
      auto loss = [&] { return dot(net.forward(x), w); };
      Mlp::Cache cache;
      net.forward(x, cache);
      Vector grads(net.parameter_count(), 0.0);
      Vector dx;
      net.backward(cache, w, grads, &dx);
      const auto numeric = numeric_over(net.parameters(), loss);
      CHECK(oracle::relative_error(grads, numeric) < 1e-6);

      Vector xv = x;
      auto input_loss = [&] { return dot(net.forward(xv), w); };
      const auto numeric_x = oracle::numeric_gradient(xv, input_loss);
      CHECK(oracle::relative_error(dx, numeric_x) < 1e-6);
    }
  }
}

TEST_CASE("backward accumulates") {
  Rng rng(3);
  Mlp net({3, 4, 2}, false, rng);
  Mlp::Cache cache;
  net.forward(Vector{1, 2, 3}, cache);
  Vector once(net.parameter_count(), 0.0), twice(net.parameter_count(), 0.0);
  net.backward(cache, Vector{1, -1}, once);
  net.backward(cache, Vector{1, -1}, twice);
  net.backward(cache, Vector{1, -1}, twice);
  for (std::size_t i = 0; i < once.size(); ++i) CHECK(twice[i] == doctest::Approx(2 * once[i]));
}

TEST_CASE("initialisation is seeded") {
  Rng a(9), b(9);
  Mlp x({5, 7, 3}, true, a), y({5, 7, 3}, true, b);
  CHECK(std::equal(x.parameters().begin(), x.parameters().end(), y.parameters().begin()));
  // output_scale shrinks only the last weight block
  Rng c(9);
  Mlp small({5, 7, 3}, true, c, 0.01);
  const auto p = x.parameters();
  const auto q = small.parameters();
  const std::size_t last = 5 * 7 + 7;
  CHECK(std::equal(p.begin(), p.begin() + last, q.begin()));
  for (std::size_t i = last; i < last + 21; ++i) CHECK(q[i] == doctest::Approx(0.01 * p[i]));
}

TEST_CASE("adam step") {
  // first bias-corrected step moves each coordinate by lr·sign(g)
  Vector params{1.0, -2.0, 0.5};
  const Vector g{0.3, -4.0, 0.0};
  AdamState s(3, 0.1);
  adam_step(params, g, s);
  CHECK(params[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(params[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(params[2] == 0.5);
  CHECK(s.step == 1);

  // second step against the literal update rule
  Vector p2 = params;
  const Vector g2{0.1, 1.0, -2.0};
  adam_step(p2, g2, s);
  for (int i = 0; i < 3; ++i) {
    const double m = 0.9 * (0.1 * g[i]) + 0.1 * g2[i];
    const double v = 0.999 * (0.001 * g[i] * g[i]) + 0.001 * g2[i] * g2[i];
    const double mh = m / (1 - 0.81), vh = v / (1 - 0.999 * 0.999);
    CHECK(p2[i] == doctest::Approx(params[i] - 0.1 * mh / (std::sqrt(vh) + 1e-8)).epsilon(1e-12));
  }

  // minimises a quadratic
  Vector x{5.0, -3.0};
  AdamState q(2, 0.05);
  for (int t = 0; t < 2000; ++t) adam_step(x, Vector{2 * x[0], 2 * x[1]}, q);
  CHECK(std::abs(x[0]) < 1e-2);
  CHECK(std::abs(x[1]) < 1e-2);
}

TEST_CASE("categorical distribution") {
  const Vector z{0.5, -1.0, 2.0, 0.0};
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) sum += std::exp(categorical_log_prob(z, i));
  CHECK(sum == doctest::Approx(1.0));
  CHECK(argmax(z) == 2);
  CHECK(categorical_entropy(Vector(5, 3.0)) == doctest::Approx(std::log(5.0)));

  // stable on huge logits
  const Vector big{1000.0, 1000.0};
  CHECK(categorical_log_prob(big, 0) == doctest::Approx(std::log(0.5)));

  Rng rng(4);
  std::vector<int> counts(4, 0);
  const int draws = 100000;
  for (int i = 0; i < draws; ++i) {
    auto d = categorical_sample(z, rng);
    CHECK(d.log_prob == categorical_log_prob(z, d.index));
    ++counts[d.index];
  }
  const auto p = softmax(z);
  for (int i = 0; i < 4; ++i) CHECK(counts[i] / double(draws) == doctest::Approx(p[i]).epsilon(0.03));
}

TEST_CASE("categorical gradients") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    Vector z = random_vector(6, rng, 2.0);
    const int idx = trial % 6;
    Vector g(6, 0.0);
    categorical_log_prob_grad(z, idx, 1.0, g);
    CHECK(oracle::relative_error(g, oracle::numeric_gradient(z, [&] {
            return categorical_log_prob(z, idx);
          })) < 1e-6);
    Vector h(6, 0.0);
    categorical_entropy_grad(z, 1.0, h);
    CHECK(oracle::relative_error(h, oracle::numeric_gradient(z, [&] {
            return categorical_entropy(z);
          })) < 1e-6);
  }
}

TEST_CASE("Plackett-Luce log-probabilities match the explicit-probability oracle") {
  Rng rng(6);
  const Vector z = random_vector(5, rng);
  const auto subsets = oracle::ordered_subsets(5, 2);
  CHECK(subsets.size() == 20);
  double total = 0.0;
  for (const auto& s : subsets) {
    const double lp = plackett_luce_log_prob(z, s);
    CHECK(lp == doctest::Approx(oracle::plackett_luce_log_prob(z, s)).epsilon(1e-12));
    total += std::exp(lp);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));

  // full rankings of 4 items also sum to one
  const Vector z4 = random_vector(4, rng);
  double full = 0.0;
  for (const auto& s : oracle::ordered_subsets(4, 4)) full += std::exp(plackett_luce_log_prob(z4, s));
  CHECK(full == doctest::Approx(1.0).epsilon(1e-12));

  const std::vector<int> dup{1, 1};
  CHECK_THROWS_AS(plackett_luce_log_prob(z, dup), DimensionError);
  const std::vector<int> out_of_range{0, 5};
  CHECK_THROWS_AS(plackett_luce_log_prob(z, out_of_range), DimensionError);
}

TEST_CASE("Plackett-Luce sampling frequencies follow the enumerated law") {
  Rng rng(7);
  const Vector z{0.3, -0.5, 1.0, 0.0, -1.2};
  std::map<std::vector<int>, int> counts;
  const int draws = 200000;
  for (int i = 0; i < draws; ++i) {
    auto d = plackett_luce_sample(z, 2, rng);
    CHECK(d.log_prob == doctest::Approx(plackett_luce_log_prob(z, d.order)).epsilon(1e-12));
    ++counts[d.order];
  }
  for (const auto& s : oracle::ordered_subsets(5, 2)) {
    const double p = std::exp(oracle::plackett_luce_log_prob(z, s));
    const double se = std::sqrt(p * (1 - p) / draws);
    CHECK(std::abs(counts[s] / double(draws) - p) < 5 * se);
  }
  CHECK(plackett_luce_greedy(z, 3) == std::vector<int>{2, 0, 3});
  CHECK(plackett_luce_greedy(Vector(4, 0.0), 2) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(plackett_luce_sample(z, 6, rng), DimensionError);
}

TEST_CASE("Plackett-Luce gradients") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    Vector z = random_vector(10, rng, 1.5);
    std::vector<int> order(10);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    order.resize(1 + trial % 6);
    Vector g(10, 0.0);
    plackett_luce_log_prob_grad(z, order, 1.0, g);
    CHECK(oracle::relative_error(g, oracle::numeric_gradient(z, [&] {
            return plackett_luce_log_prob(z, order);
          })) < 1e-6);
    Vector h(10, 0.0);
    plackett_luce_entropy_grad(z, order, 1.0, h);
    CHECK(oracle::relative_error(h, oracle::numeric_gradient(z, [&] {
            return plackett_luce_entropy(z, order);
          })) < 1e-6);
  }
}

TEST_CASE("archive round trip") {
  const auto dir = std::filesystem::temp_directory_path() / "peatsim_archive_test";
  std::filesystem::create_directories(dir);
  Rng rng(10);
  Mlp net({4, 6, 2}, true, rng);
  ParameterArchive a;
  a.put("net", net);
  a.put("matrix", {2, 3}, Vector{1, 2, 3, 4, 5, 6});
  a.put_text("note", "step=12");
  a.save(dir / "ckpt");

  const auto b = ParameterArchive::load(dir / "ckpt");
  Rng other(11);
  Mlp copy({4, 6, 2}, true, other);
  b.get_into("net", copy);
  CHECK(std::equal(copy.parameters().begin(), copy.parameters().end(), net.parameters().begin()));
  CHECK(b.get("matrix").shape == std::vector<std::int64_t>{2, 3});
  CHECK(b.get("matrix").values == Vector{1, 2, 3, 4, 5, 6});
  CHECK(b.text("note") == "step=12");
  CHECK_THROWS_AS(b.get("missing"), ConfigError);
  CHECK_THROWS_AS(b.text("missing"), ConfigError);
  Rng r3(12);
  Mlp wrong({4, 5, 2}, true, r3);
  CHECK_THROWS_AS(b.get_into("net", wrong), DimensionError);

  // byte size of the blob equals the tensor counts
  CHECK(std::filesystem::file_size(dir / "ckpt.bin") == (net.parameter_count() + 6) * sizeof(double));
  std::filesystem::remove_all(dir);
}
