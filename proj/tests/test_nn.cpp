#include <catch2/catch_amalgamated.hpp>

#include "twinforge/nn.hpp"
#include "twinforge/rng.hpp"

using namespace twinforge;
using namespace twinforge::nn;

namespace {

// Scalar loss used for gradient checking: squared error against a fixed
// target after the network's own activations.
double sse_loss(const Mlp& net, const std::vector<std::vector<double>>& xs,
                const std::vector<std::vector<double>>& ys) {
  double loss = 0.0;
  for (std::size_t s = 0; s < xs.size(); ++s) {
    const auto out = net.forward(xs[s]);
    for (std::size_t i = 0; i < out.size(); ++i)
      loss += 0.5 * (out[i] - ys[s][i]) * (out[i] - ys[s][i]);
  }
  return loss;
}

std::vector<double> sse_grad(const Mlp& net, const std::vector<std::vector<double>>& xs,
                             const std::vector<std::vector<double>>& ys) {
  std::vector<double> grad(net.param_count(), 0.0);
  for (std::size_t s = 0; s < xs.size(); ++s) {
    Cache cache;
    const auto out = net.forward(xs[s], &cache);
    std::vector<double> dLdy(out.size());
    for (std::size_t i = 0; i < out.size(); ++i) dLdy[i] = out[i] - ys[s][i];
    net.backward(cache, dLdy, grad);
  }
  return grad;
}

double max_rel_error(const std::vector<double>& a, const std::vector<double>& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double denom = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("forward pass matches a hand-computed single neuron") {
  Mlp net({2, 1}, {Act::Sigmoid}, 1);
  net.set_params(std::vector<double>{0.5, -0.25, 0.1});  // w = (0.5, -0.25), b = 0.1
  const auto y = net.forward({1.0, 2.0});
  const double pre = 0.5 * 1.0 - 0.25 * 2.0 + 0.1;
  CHECK(y[0] == Catch::Approx(1.0 / (1.0 + std::exp(-pre))).margin(1e-12));
}

TEST_CASE("analytic gradients match central finite differences") {
  // Mixed activations across layers, several samples.
  const std::vector<int> dims{3, 5, 4, 2};
  const std::vector<Act> acts{Act::LeakyRelu, Act::Tanh, Act::Sigmoid};
  Mlp net(dims, acts, 99);
  RandomStream rng(123);
  std::vector<std::vector<double>> xs, ys;
  for (int s = 0; s < 4; ++s) {
    std::vector<double> x(3), y(2);
    for (auto& v : x) v = rng.uniform(-1.0, 1.0);
    for (auto& v : y) v = rng.uniform(0.1, 0.9);
    xs.push_back(x);
    ys.push_back(y);
  }

  const auto analytic = sse_grad(net, xs, ys);
  auto params = net.get_params();
  std::vector<double> fd(params.size());
  const double eps = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params;
    p[i] = params[i] + eps;
    net.set_params(p);
    const double hi = sse_loss(net, xs, ys);
    p[i] = params[i] - eps;
    net.set_params(p);
    const double lo = sse_loss(net, xs, ys);
    fd[i] = (hi - lo) / (2.0 * eps);
  }
  net.set_params(params);
  CHECK(max_rel_error(analytic, fd) < 1e-4);
}

TEST_CASE("adam reduces loss on a small regression task") {
  Mlp net({2, 8, 1}, {Act::Tanh, Act::Linear}, 7);
  RandomStream rng(7);
  std::vector<std::vector<double>> xs, ys;
  for (int i = 0; i < 64; ++i) {
    const double a = rng.uniform(-1.0, 1.0), b = rng.uniform(-1.0, 1.0);
    xs.push_back({a, b});
    ys.push_back({a * b});
  }
  Adam opt;
  opt.lr = 0.01;
  const double initial = sse_loss(net, xs, ys);
  for (int epoch = 0; epoch < 200; ++epoch) {
    auto grad = sse_grad(net, xs, ys);
    opt.step(net, grad);
  }
  CHECK(sse_loss(net, xs, ys) < 0.2 * initial);
}

TEST_CASE("parameter round-trip and serialization") {
  Mlp net({3, 4, 2}, {Act::Relu, Act::Sigmoid}, 5);
  const auto params = net.get_params();
  CHECK(params.size() == net.param_count());
  CHECK(params.size() == 3 * 4 + 4 + 4 * 2 + 2);

  const auto j = net.to_json();
  const auto net2 = Mlp::from_json(j);
  CHECK(net2.get_params() == params);
  const auto x = std::vector<double>{0.1, -0.2, 0.3};
  CHECK(net.forward(x) == net2.forward(x));
}

TEST_CASE("same seed builds identical networks") {
  Mlp a({4, 6, 3}, {Act::Relu, Act::Sigmoid}, 11);
  Mlp b({4, 6, 3}, {Act::Relu, Act::Sigmoid}, 11);
  Mlp c({4, 6, 3}, {Act::Relu, Act::Sigmoid}, 12);
  CHECK(a.get_params() == b.get_params());
  CHECK(a.get_params() != c.get_params());
}

TEST_CASE("sigmoid outputs stay in the open unit interval on its input domain") {
  Mlp net({5, 16, 1}, {Act::LeakyRelu, Act::Sigmoid}, 3);
  RandomStream rng(3);
  bool all_in = true;
  for (int i = 0; i < 10000; ++i) {
    std::vector<double> x(5);
    for (auto& v : x) v = rng.uniform(-3.0, 3.0);
    const double y = net.forward(x)[0];
    all_in = all_in && y > 0.0 && y < 1.0;
  }
  CHECK(all_in);
}

TEST_CASE("softmax blocks normalize in place") {
  std::vector<double> v{1.0, 2.0, 3.0, 100.0, 100.0};
  nn::softmax_block(v, 0, 3);
  CHECK(v[0] + v[1] + v[2] == Catch::Approx(1.0).margin(1e-12));
  CHECK(v[2] > v[1]);
  CHECK(v[3] == 100.0);  // outside the block: untouched
}
