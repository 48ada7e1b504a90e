#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "rfim/errors.hpp"
#include "rfim/rng.hpp"

namespace rfim {

/// Neumaier-compensated accumulator.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double mean(std::span<const double> xs) {
  if (xs.empty()) throw validation_error("mean: empty sample");
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value() / double(xs.size());
}

/// Unbiased sample variance (n-1 denominator); 0 for n < 2.
inline double sample_variance(std::span<const double> xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  CompensatedSum s;
  for (double x : xs) s.add((x - m) * (x - m));
  return s.value() / double(xs.size() - 1);
}

inline double standard_error(std::span<const double> xs) {
  return std::sqrt(sample_variance(xs) / double(xs.size()));
}

/// Wald standard error for a binomial proportion.
inline double wald_se(double p, std::int64_t n) {
  if (n <= 0) throw validation_error("wald_se: need n > 0");
  return std::sqrt(std::max(0.0, p * (1.0 - p)) / double(n));
}

/// |p_hat - p0| <= z * SE(p0) + continuity correction 1/(2n).
inline bool proportion_within(double p_hat, double p0, std::int64_t n, double z) {
  return std::abs(p_hat - p0) <= z * wald_se(p0, n) + 0.5 / double(n);
}

inline double median_sorted(std::span<const double> sorted) {
  if (sorted.empty()) throw validation_error("median: empty sample");
  const std::size_t n = sorted.size();
  return n % 2 == 1 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
}

inline double median(std::vector<double> xs) {
  std::sort(xs.begin(), xs.end());
  return median_sorted(xs);
}

/// Weighted least squares fit y = intercept + slope * x.
struct LineFit {
  double slope = 0;
  double intercept = 0;
  double slope_se = 0;
  double intercept_se = 0;
  std::vector<double> residuals;
};

inline LineFit weighted_least_squares(std::span<const double> xs, std::span<const double> ys,
                                      std::span<const double> ws) {
  if (xs.size() != ys.size() || xs.size() != ws.size() || xs.size() < 2)
    throw validation_error("weighted_least_squares: need >= 2 points of equal length");
  CompensatedSum sw, swx, swy, swxx, swxy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (ws[i] <= 0) throw validation_error("weighted_least_squares: weights must be positive");
    sw.add(ws[i]);
    swx.add(ws[i] * xs[i]);
    swy.add(ws[i] * ys[i]);
    swxx.add(ws[i] * xs[i] * xs[i]);
    swxy.add(ws[i] * xs[i] * ys[i]);
  }
  const double w = sw.value(), wx = swx.value(), wy = swy.value();
  const double det = w * swxx.value() - wx * wx;
  if (det <= 0) throw validation_error("weighted_least_squares: degenerate design");
  LineFit fit;
  fit.slope = (w * swxy.value() - wx * wy) / det;
  fit.intercept = (swxx.value() * wy - wx * swxy.value()) / det;
  // Known-variance GLS errors: weights are assumed to be 1/var(y_i).
  fit.slope_se = std::sqrt(w / det);
  fit.intercept_se = std::sqrt(swxx.value() / det);
  fit.residuals.resize(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i)
    fit.residuals[i] = ys[i] - (fit.intercept + fit.slope * xs[i]);
  return fit;
}

struct BootstrapCi {
  double estimate = 0;
  double low = 0;
  double high = 0;
};

/// Percentile bootstrap (2.5/97.5) of the median, resampled with the keyed
/// generator so results are fully deterministic.
inline BootstrapCi bootstrap_median(std::span<const double> xs, int resamples,
                                    std::uint64_t master_seed, std::uint64_t stream) {
  if (xs.empty()) throw validation_error("bootstrap_median: empty sample");
  std::vector<double> sorted(xs.begin(), xs.end());
  std::sort(sorted.begin(), sorted.end());
  BootstrapCi ci;
  ci.estimate = median_sorted(sorted);
  std::vector<double> medians(resamples);
  std::vector<double> draw(xs.size());
  for (int r = 0; r < resamples; ++r) {
    for (std::size_t i = 0; i < xs.size(); ++i) {
      const std::uint64_t bits =
          keyed_bits(master_seed, stream, std::int32_t(r), std::int32_t(i), kAuxLaneBootstrap);
      draw[i] = sorted[bits % xs.size()];
    }
    medians[r] = median(draw);
  }
  std::sort(medians.begin(), medians.end());
  const auto pick = [&](double q) {
    const std::size_t i = std::size_t(q * double(resamples - 1) + 0.5);
    return medians[std::min(i, medians.size() - 1)];
  };
  ci.low = pick(0.025);
  ci.high = pick(0.975);
  return ci;
}

inline double pearson_correlation(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size() || xs.size() < 2)
    throw validation_error("pearson_correlation: need paired samples");
  const double mx = mean(xs), my = mean(ys);
  CompensatedSum sxy, sxx, syy;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy.add((xs[i] - mx) * (ys[i] - my));
    sxx.add((xs[i] - mx) * (xs[i] - mx));
    syy.add((ys[i] - my) * (ys[i] - my));
  }
  const double den = std::sqrt(sxx.value() * syy.value());
  return den == 0 ? 0.0 : sxy.value() / den;
}

}  // namespace rfim
