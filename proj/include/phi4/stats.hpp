#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "rng.hpp"

namespace phi4 {

struct ObservableEstimate {
  std::string label;
  double value = 0;
  double stderr_ = 0;
  std::size_t n_samples = 0;

  // z-score against a null value
  double z(double null = 0) const {
    if (stderr_ == 0) return value == null ? 0 : (value > null ? 1e300 : -1e300);
    return (value - null) / stderr_;
  }
};

inline double mean(const std::vector<double>& x) {
  return x.empty() ? 0 : std::accumulate(x.begin(), x.end(), 0.0) / double(x.size());
}

inline double variance(const std::vector<double>& x) {
  if (x.size() < 2) return 0;
  double m = mean(x), s = 0;
  for (double v : x) s += (v - m) * (v - m);
  return s / double(x.size() - 1);
}

// Means of `nb` contiguous batches (trailing remainder dropped).
inline std::vector<double> batch_series(const std::vector<double>& x, std::size_t nb) {
  std::size_t len = x.size() / nb;
  std::vector<double> b(nb, 0.0);
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t k = 0; k < len; ++k) b[i] += x[i * len + k];
    b[i] /= double(len);
  }
  return b;
}

// Batch-means estimate of the mean of a (possibly correlated) series.
inline ObservableEstimate batch_means(const std::vector<double>& x, std::size_t nb = 20, std::string label = {}) {
  ObservableEstimate e;
  e.label = std::move(label);
  e.n_samples = x.size();
  if (x.size() < 2 * nb) nb = std::max<std::size_t>(1, x.size() / 2);
  if (nb < 2) {
    e.value = mean(x);
    return e;
  }
  auto b = batch_series(x, nb);
  std::size_t used = (x.size() / nb) * nb;
  e.value = std::accumulate(x.begin(), x.begin() + long(used), 0.0) / double(used);
  e.stderr_ = std::sqrt(variance(b) / double(nb));
  return e;
}

// Jackknife over batches for a smooth function of several batched means.
// `series[c]` is the c-th input series; fn maps the vector of means to the statistic.
inline ObservableEstimate jackknife_batches(const std::vector<std::vector<double>>& series,
                                            const std::function<double(const std::vector<double>&)>& fn,
                                            std::size_t nb = 20, std::string label = {}) {
  ObservableEstimate e;
  e.label = std::move(label);
  e.n_samples = series.front().size();
  nb = std::min(nb, e.n_samples);
  const std::size_t C = series.size();
  std::vector<std::vector<double>> batches(C);
  std::vector<double> full(C);
  for (std::size_t c = 0; c < C; ++c) {
    batches[c] = batch_series(series[c], nb);
    full[c] = mean(batches[c]);
  }
  e.value = fn(full);
  if (nb < 2) {
    e.stderr_ = std::numeric_limits<double>::quiet_NaN();
    return e;
  }
  std::vector<double> loo(nb);
  std::vector<double> m(C);
  for (std::size_t i = 0; i < nb; ++i) {
    for (std::size_t c = 0; c < C; ++c) m[c] = (full[c] * double(nb) - batches[c][i]) / double(nb - 1);
    loo[i] = fn(m);
  }
  double lm = mean(loo), s = 0;
  for (double v : loo) s += (v - lm) * (v - lm);
  e.stderr_ = std::sqrt(double(nb - 1) / double(nb) * s);
  return e;
}

// Bootstrap standard error of a statistic of a sample list (resampling indices).
template <class Stat>
double bootstrap_stderr(std::size_t n, Stat&& stat, std::size_t resamples, const CounterRng& rng) {
  RngStream s(rng, Purpose::bootstrap);
  std::vector<double> vals;
  vals.reserve(resamples);
  std::vector<std::size_t> idx(n);
  for (std::size_t r = 0; r < resamples; ++r) {
    for (auto& i : idx) i = s.below(n);
    vals.push_back(stat(idx));
  }
  return std::sqrt(variance(vals));
}

}  // namespace phi4
