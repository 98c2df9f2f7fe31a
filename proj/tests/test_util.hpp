#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dmflow/common.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/rng.hpp"

namespace dmflow::testing {

inline Transaction make_tx(std::string id, Timestamp ts,
                           std::vector<TxIo> inputs, std::vector<TxIo> outputs) {
  Transaction tx;
  tx.tx_id = std::move(id);
  tx.timestamp = ts;
  tx.inputs = std::move(inputs);
  tx.outputs = std::move(outputs);
  return tx;
}

// Chi-square upper-tail probability via the regularized incomplete gamma
// function (series + continued fraction).
inline double gamma_q(double a, double x) {
  if (x < 0 || a <= 0) return 1.0;
  if (x == 0) return 1.0;
  double gln = std::lgamma(a);
  if (x < a + 1.0) {
    // Series for P(a,x); Q = 1 - P.
    double ap = a, sum = 1.0 / a, del = sum;
    for (int n = 0; n < 500; ++n) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::fabs(del) < std::fabs(sum) * 1e-14) break;
    }
    double p = sum * std::exp(-x + a * std::log(x) - gln);
    return 1.0 - p;
  }
  // Continued fraction for Q(a,x).
  double b = x + 1.0 - a, c = 1e300, d = 1.0 / b, h = d;
  for (int i = 1; i <= 500; ++i) {
    double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < 1e-300) d = 1e-300;
    c = b + an / c;
    if (std::fabs(c) < 1e-300) c = 1e-300;
    d = 1.0 / d;
    double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < 1e-14) break;
  }
  return std::exp(-x + a * std::log(x) - gln) * h;
}

inline double chi_square_p(const std::vector<double>& observed,
                           const std::vector<double>& expected) {
  double chi2 = 0.0;
  std::size_t df = 0;
  for (std::size_t i = 0; i < observed.size(); ++i) {
    if (expected[i] <= 0) continue;
    double d = observed[i] - expected[i];
    chi2 += d * d / expected[i];
    ++df;
  }
  if (df <= 1) return 1.0;
  return gamma_q(static_cast<double>(df - 1) / 2.0, chi2 / 2.0);
}

}  // namespace dmflow::testing
