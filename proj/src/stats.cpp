#include "dmflow/stats.hpp"

#include <algorithm>
#include <cmath>

#include "dmflow/errors.hpp"

namespace dmflow {

double kolmogorov_sf(double lambda) {
  if (lambda <= 0) return 1.0;
  // Alternating series; converges fast for lambda above ~0.3. Below that the
  // survival probability is 1 to double precision.
  double sum = 0.0;
  double sign = 1.0;
  for (int k = 1; k <= 100; ++k) {
    double term = std::exp(-2.0 * k * k * lambda * lambda);
    sum += sign * term;
    if (term < 1e-16) break;
    sign = -sign;
  }
  double p = 2.0 * sum;
  return std::clamp(p, 0.0, 1.0);
}

KsResult ks_two_sample(std::span<const double> sample1,
                       std::span<const double> sample2) {
  if (sample1.empty() || sample2.empty()) throw EmptySample();

  std::vector<double> a(sample1.begin(), sample1.end());
  std::vector<double> b(sample2.begin(), sample2.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());

  const double n1 = static_cast<double>(a.size());
  const double n2 = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    double diff = std::abs(static_cast<double>(i) / n1 -
                           static_cast<double>(j) / n2);
    d = std::max(d, diff);
  }
  // Once one sample is exhausted the CDF gap only shrinks back to 0.

  KsResult r;
  r.d_statistic = d;
  r.n1 = a.size();
  r.n2 = b.size();
  double ne = n1 * n2 / (n1 + n2);
  r.p_value = kolmogorov_sf(std::sqrt(ne) * d);
  return r;
}

namespace {

// Order statistic at fractional position (n-1)*q of a sorted sample.
double interpolated_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.size() == 1) return sorted[0];
  double pos = q * static_cast<double>(sorted.size() - 1);
  auto lo = static_cast<std::size_t>(pos);
  if (lo >= sorted.size() - 1) return sorted.back();
  double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[lo + 1] - sorted[lo]);
}

}  // namespace

Quartiles quartiles(std::span<const double> sample) {
  if (sample.empty()) throw EmptySample();
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());

  Quartiles q;
  q.q1 = interpolated_quantile(sorted, 0.25);
  q.median = interpolated_quantile(sorted, 0.5);
  q.q3 = interpolated_quantile(sorted, 0.75);

  double iqr = q.q3 - q.q1;
  double lo_fence = q.q1 - 1.5 * iqr;
  double hi_fence = q.q3 + 1.5 * iqr;
  q.whisker_lo = q.q3;
  q.whisker_hi = q.q1;
  for (double v : sorted) {
    if (v >= lo_fence) {
      q.whisker_lo = v;
      break;
    }
  }
  for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
    if (*it <= hi_fence) {
      q.whisker_hi = *it;
      break;
    }
  }
  return q;
}

double mean(std::span<const double> sample) {
  if (sample.empty()) throw EmptySample();
  double s = 0.0;
  for (double v : sample) s += v;
  return s / static_cast<double>(sample.size());
}

double median(std::span<const double> sample) {
  if (sample.empty()) throw EmptySample();
  std::vector<double> sorted(sample.begin(), sample.end());
  std::sort(sorted.begin(), sorted.end());
  return interpolated_quantile(sorted, 0.5);
}

}  // namespace dmflow
