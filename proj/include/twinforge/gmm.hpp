#pragma once

// 1-D Gaussian mixture fit by EM, with BIC-based mode-count selection.
// Deterministic: initialization uses quantiles, not random restarts.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace twinforge::gmm {

inline constexpr double kStdFloor = 1e-6;

struct Gmm1D {
  std::vector<double> weight;
  std::vector<double> mean;
  std::vector<double> stddev;

  int modes() const { return static_cast<int>(weight.size()); }

  double pdf(double x) const {
    double p = 0.0;
    for (int k = 0; k < modes(); ++k) {
      const double z = (x - mean[k]) / stddev[k];
      p += weight[k] * std::exp(-0.5 * z * z) / (stddev[k] * std::sqrt(2.0 * M_PI));
    }
    return p;
  }

  std::vector<double> responsibilities(double x) const {
    std::vector<double> r(modes());
    double total = 0.0;
    for (int k = 0; k < modes(); ++k) {
      const double z = (x - mean[k]) / stddev[k];
      r[k] = weight[k] * std::exp(-0.5 * z * z) / stddev[k];
      total += r[k];
    }
    if (total <= 0.0) {
      // x is far outside every mode; fall back to the nearest mean.
      int best = 0;
      for (int k = 1; k < modes(); ++k)
        if (std::abs(x - mean[k]) < std::abs(x - mean[best])) best = k;
      std::fill(r.begin(), r.end(), 0.0);
      r[best] = 1.0;
      return r;
    }
    for (double& v : r) v /= total;
    return r;
  }

  int argmax_mode(double x) const {
    const auto r = responsibilities(x);
    return static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }

  double log_likelihood(const std::vector<double>& xs) const {
    double ll = 0.0;
    for (double x : xs) ll += std::log(std::max(pdf(x), 1e-300));
    return ll;
  }

  double bic(const std::vector<double>& xs) const {
    const int params = 3 * modes() - 1;  // weights constrained to sum to 1
    return params * std::log(static_cast<double>(xs.size())) - 2.0 * log_likelihood(xs);
  }
};

struct FitResult {
  Gmm1D model;
  std::vector<double> loglik_per_iter;
};

inline FitResult fit(const std::vector<double>& xs, int k, int max_iter = 200,
                     double tol = 1e-9) {
  if (k < 1) throw std::invalid_argument("mode count must be >= 1");
  if (xs.empty()) throw std::invalid_argument("cannot fit an empty column");

  std::vector<double> sorted = xs;
  std::sort(sorted.begin(), sorted.end());
  const bool constant = sorted.front() == sorted.back();
  if (constant) k = 1;  // degenerate column collapses to a single mode

  int distinct = 1;
  for (std::size_t i = 1; i < sorted.size(); ++i)
    if (sorted[i] != sorted[i - 1]) distinct++;
  if (distinct < k) throw std::invalid_argument("need at least K distinct values");

  FitResult out;
  Gmm1D& g = out.model;
  g.weight.assign(k, 1.0 / k);
  g.mean.resize(k);
  g.stddev.resize(k);
  double global_mean = 0.0;
  for (double x : xs) global_mean += x;
  global_mean /= xs.size();
  double global_var = 0.0;
  for (double x : xs) global_var += (x - global_mean) * (x - global_mean);
  global_var /= xs.size();
  const double init_std = std::max(std::sqrt(global_var), kStdFloor);
  for (int j = 0; j < k; ++j) {
    // Quantile init spreads the means across the data range.
    const std::size_t idx = static_cast<std::size_t>(
        (2.0 * j + 1.0) / (2.0 * k) * (sorted.size() - 1) + 0.5);
    g.mean[j] = sorted[idx];
    g.stddev[j] = init_std;
  }

  const std::size_t n = xs.size();
  std::vector<double> resp(static_cast<std::size_t>(k) * n);
  double prev_ll = -std::numeric_limits<double>::infinity();
  for (int iter = 0; iter < max_iter; ++iter) {
    // E step.
    for (std::size_t i = 0; i < n; ++i) {
      const auto r = g.responsibilities(xs[i]);
      for (int j = 0; j < k; ++j) resp[j * n + i] = r[j];
    }
    // M step.
    for (int j = 0; j < k; ++j) {
      double nk = 0.0, mu = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[j * n + i];
        mu += resp[j * n + i] * xs[i];
      }
      if (nk < 1e-12) {
        g.weight[j] = 1e-12;
        continue;
      }
      mu /= nk;
      double var = 0.0;
      for (std::size_t i = 0; i < n; ++i)
        var += resp[j * n + i] * (xs[i] - mu) * (xs[i] - mu);
      var /= nk;
      g.weight[j] = nk / n;
      g.mean[j] = mu;
      g.stddev[j] = std::max(std::sqrt(var), kStdFloor);
    }
    double wsum = 0.0;
    for (double w : g.weight) wsum += w;
    for (double& w : g.weight) w /= wsum;

    const double ll = g.log_likelihood(xs);
    out.loglik_per_iter.push_back(ll);
    if (ll - prev_ll < tol && iter > 0) break;
    prev_ll = ll;
  }
  return out;
}

// Picks K in [1, k_max] by BIC; falls back when data cannot support K modes.
inline int select_k_bic(const std::vector<double>& xs, int k_max = 3) {
  int best_k = 1;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    try {
      const auto r = fit(xs, k);
      const double b = r.model.bic(xs);
      if (b < best_bic) {
        best_bic = b;
        best_k = k;
      }
    } catch (const std::invalid_argument&) {
      break;
    }
  }
  return best_k;
}

}  // namespace twinforge::gmm
