#pragma once

#include <span>
#include <vector>

#include "dmflow/common.hpp"

namespace dmflow {

struct KsResult {
  double d_statistic = 0.0;
  double p_value = 1.0;
  std::size_t n1 = 0;
  std::size_t n2 = 0;
};

// Exact two-sample D via a merged sweep over both sorted samples; p-value
// from the asymptotic Kolmogorov distribution at sqrt(n1*n2/(n1+n2)) * D.
// Throws EmptySample.
KsResult ks_two_sample(std::span<const double> sample1,
                       std::span<const double> sample2);

// Survival function of the Kolmogorov distribution,
// Q(lambda) = 2 * sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
double kolmogorov_sf(double lambda);

struct Quartiles {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;  // smallest sample value >= q1 - 1.5*IQR
  double whisker_hi = 0.0;  // largest sample value <= q3 + 1.5*IQR
};

// Quartiles by linear interpolation between order statistics
// (position (n-1)*q). Throws EmptySample.
Quartiles quartiles(std::span<const double> sample);

double mean(std::span<const double> sample);
double median(std::span<const double> sample);

}  // namespace dmflow
