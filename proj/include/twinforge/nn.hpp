#pragma once

// Minimal dense feedforward network with explicit backpropagation and Adam.
// Everything is double precision and seeded; gradients are exact and are
// checked against central finite differences in the test suite.

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "twinforge/rng.hpp"

namespace twinforge::nn {

using nlohmann::json;

enum class Act { Linear, Relu, LeakyRelu, Tanh, Sigmoid };

inline const char* act_name(Act a) {
  switch (a) {
    case Act::Linear: return "linear";
    case Act::Relu: return "relu";
    case Act::LeakyRelu: return "leaky_relu";
    case Act::Tanh: return "tanh";
    case Act::Sigmoid: return "sigmoid";
  }
  return "linear";
}
inline Act act_from_name(const std::string& s) {
  if (s == "linear") return Act::Linear;
  if (s == "relu") return Act::Relu;
  if (s == "leaky_relu") return Act::LeakyRelu;
  if (s == "tanh") return Act::Tanh;
  if (s == "sigmoid") return Act::Sigmoid;
  throw std::invalid_argument("unknown activation: " + s);
}

inline double activate(Act a, double x) {
  switch (a) {
    case Act::Linear: return x;
    case Act::Relu: return x > 0.0 ? x : 0.0;
    case Act::LeakyRelu: return x > 0.0 ? x : 0.2 * x;
    case Act::Tanh: return std::tanh(x);
    case Act::Sigmoid: return 1.0 / (1.0 + std::exp(-x));
  }
  return x;
}

// Derivative in terms of pre-activation x and activation value y.
inline double activate_grad(Act a, double x, double y) {
  switch (a) {
    case Act::Linear: return 1.0;
    case Act::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Act::LeakyRelu: return x > 0.0 ? 1.0 : 0.2;
    case Act::Tanh: return 1.0 - y * y;
    case Act::Sigmoid: return y * (1.0 - y);
  }
  return 1.0;
}

struct Layer {
  int in = 0, out = 0;
  Act act = Act::Linear;
  std::vector<double> w;  // out x in, row-major
  std::vector<double> b;
};

// Per-sample forward caches needed by backward().
struct Cache {
  std::vector<std::vector<double>> inputs;  // input to each layer
  std::vector<std::vector<double>> pre;     // pre-activations
  std::vector<std::vector<double>> post;    // activations
};

class Mlp {
 public:
  Mlp() = default;

  // dims = {in, h1, ..., out}; acts has dims.size()-1 entries.
  Mlp(const std::vector<int>& dims, const std::vector<Act>& acts, std::uint64_t seed) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
      throw std::invalid_argument("inconsistent layer specification");
    RandomStream rng(seed);
    for (std::size_t i = 0; i + 1 < dims.size(); ++i) {
      Layer l;
      l.in = dims[i];
      l.out = dims[i + 1];
      l.act = acts[i];
      const double scale = std::sqrt(6.0 / (l.in + l.out));
      l.w.resize(static_cast<std::size_t>(l.in) * l.out);
      for (double& v : l.w) v = rng.uniform(-scale, scale);
      l.b.assign(l.out, 0.0);
      layers_.push_back(std::move(l));
    }
  }

  int input_size() const { return layers_.front().in; }
  int output_size() const { return layers_.back().out; }
  const std::vector<Layer>& layers() const { return layers_; }

  std::vector<double> forward(const std::vector<double>& x, Cache* cache = nullptr) const {
    if (static_cast<int>(x.size()) != input_size())
      throw std::invalid_argument("input size mismatch");
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
      cache->post.clear();
    }
    std::vector<double> cur = x;
    for (const Layer& l : layers_) {
      std::vector<double> pre(l.out, 0.0);
      for (int o = 0; o < l.out; ++o) {
        double s = l.b[o];
        const double* wrow = &l.w[static_cast<std::size_t>(o) * l.in];
        for (int i = 0; i < l.in; ++i) s += wrow[i] * cur[i];
        pre[o] = s;
      }
      std::vector<double> post(l.out);
      for (int o = 0; o < l.out; ++o) post[o] = activate(l.act, pre[o]);
      if (cache) {
        cache->inputs.push_back(cur);
        cache->pre.push_back(pre);
        cache->post.push_back(post);
      }
      cur = std::move(post);
    }
    return cur;
  }

  // Backpropagates dL/dy, accumulating parameter gradients into `grad`
  // (laid out like get_params) and returning dL/dx.
  std::vector<double> backward(const Cache& cache, const std::vector<double>& dLdy,
                               std::vector<double>& grad) const {
    if (grad.size() != param_count()) grad.assign(param_count(), 0.0);
    std::vector<double> delta = dLdy;
    std::size_t offset = param_count();
    for (int li = static_cast<int>(layers_.size()) - 1; li >= 0; --li) {
      const Layer& l = layers_[li];
      offset -= static_cast<std::size_t>(l.in) * l.out + l.out;
      for (int o = 0; o < l.out; ++o)
        delta[o] *= activate_grad(l.act, cache.pre[li][o], cache.post[li][o]);
      double* gw = &grad[offset];
      double* gb = &grad[offset + static_cast<std::size_t>(l.in) * l.out];
      const std::vector<double>& input = cache.inputs[li];
      for (int o = 0; o < l.out; ++o) {
        for (int i = 0; i < l.in; ++i)
          gw[static_cast<std::size_t>(o) * l.in + i] += delta[o] * input[i];
        gb[o] += delta[o];
      }
      std::vector<double> prev(l.in, 0.0);
      for (int i = 0; i < l.in; ++i) {
        double s = 0.0;
        for (int o = 0; o < l.out; ++o)
          s += l.w[static_cast<std::size_t>(o) * l.in + i] * delta[o];
        prev[i] = s;
      }
      delta = std::move(prev);
    }
    return delta;
  }

  std::size_t param_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers_) n += static_cast<std::size_t>(l.in) * l.out + l.out;
    return n;
  }

  std::vector<double> get_params() const {
    std::vector<double> p;
    p.reserve(param_count());
    for (const Layer& l : layers_) {
      p.insert(p.end(), l.w.begin(), l.w.end());
      p.insert(p.end(), l.b.begin(), l.b.end());
    }
    return p;
  }

  void set_params(std::span<const double> p) {
    if (p.size() != param_count()) throw std::invalid_argument("parameter size mismatch");
    std::size_t off = 0;
    for (Layer& l : layers_) {
      std::copy(p.begin() + off, p.begin() + off + l.w.size(), l.w.begin());
      off += l.w.size();
      std::copy(p.begin() + off, p.begin() + off + l.b.size(), l.b.begin());
      off += l.b.size();
    }
  }

  // Name of the layer owning flat parameter index `i`, for diagnostics.
  std::string layer_of_param(std::size_t i) const {
    std::size_t off = 0;
    for (std::size_t li = 0; li < layers_.size(); ++li) {
      const std::size_t span = layers_[li].w.size() + layers_[li].b.size();
      if (i < off + span) return "dense" + std::to_string(li);
      off += span;
    }
    return "out-of-range";
  }

  json to_json() const {
    json layers = json::array();
    for (const Layer& l : layers_)
      layers.push_back({{"in", l.in}, {"out", l.out}, {"act", act_name(l.act)},
                        {"w", l.w}, {"b", l.b}});
    return json{{"layers", layers}};
  }

  static Mlp from_json(const json& j) {
    Mlp m;
    for (const auto& lj : j.at("layers")) {
      Layer l;
      l.in = lj.at("in").get<int>();
      l.out = lj.at("out").get<int>();
      l.act = act_from_name(lj.at("act").get<std::string>());
      l.w = lj.at("w").get<std::vector<double>>();
      l.b = lj.at("b").get<std::vector<double>>();
      m.layers_.push_back(std::move(l));
    }
    return m;
  }

 private:
  std::vector<Layer> layers_;
};

struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<double> m, v;
  long t = 0;

  void step(Mlp& net, const std::vector<double>& grad) {
    if (m.empty()) {
      m.assign(grad.size(), 0.0);
      v.assign(grad.size(), 0.0);
    }
    ++t;
    std::vector<double> p = net.get_params();
    const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < p.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      p[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + eps);
    }
    net.set_params(p);
  }
};

// Softmax over [begin, end) of a vector, in place.
inline void softmax_block(std::vector<double>& v, std::size_t begin, std::size_t end) {
  double mx = v[begin];
  for (std::size_t i = begin; i < end; ++i) mx = std::max(mx, v[i]);
  double sum = 0.0;
  for (std::size_t i = begin; i < end; ++i) {
    v[i] = std::exp(v[i] - mx);
    sum += v[i];
  }
  for (std::size_t i = begin; i < end; ++i) v[i] /= sum;
}

}  // namespace twinforge::nn
