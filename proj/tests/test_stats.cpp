#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "dmflow/errors.hpp"
#include "dmflow/rng.hpp"
#include "dmflow/stats.hpp"

using namespace dmflow;

namespace {

// Brute-force D: evaluate |F1 - F2| at every sample point of both samples.
double brute_force_d(std::vector<double> a, std::vector<double> b) {
  std::vector<double> points = a;
  points.insert(points.end(), b.begin(), b.end());
  double d = 0.0;
  for (double x : points) {
    auto f1 = static_cast<double>(std::count_if(a.begin(), a.end(),
                                                [&](double v) { return v <= x; })) /
              static_cast<double>(a.size());
    auto f2 = static_cast<double>(std::count_if(b.begin(), b.end(),
                                                [&](double v) { return v <= x; })) /
              static_cast<double>(b.size());
    d = std::max(d, std::abs(f1 - f2));
  }
  return d;
}

std::vector<double> random_sample(Rng& rng, std::size_t max_n, int value_range) {
  std::vector<double> v(1 + rng.uniform_u64(max_n));
  for (auto& x : v) {
    x = static_cast<double>(rng.uniform_int(-value_range, value_range)) / 4.0;
  }
  return v;
}

}  // namespace

TEST_CASE("identical samples give D = 0") {
  std::vector<double> a = {1, 2, 3, 4};
  auto r = ks_two_sample(a, a);
  CHECK(r.d_statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0));
}

TEST_CASE("disjoint supports give D = 1") {
  std::vector<double> a = {1, 2, 3};
  std::vector<double> b = {10, 11};
  auto r = ks_two_sample(a, b);
  CHECK(r.d_statistic == 1.0);
}

TEST_CASE("D matches the brute-force sup over sample points") {
  std::vector<double> a = {1, 2, 3};
  std::vector<double> b = {2, 3, 4};
  auto r = ks_two_sample(a, b);
  CHECK(r.d_statistic == brute_force_d(a, b));
  CHECK(r.d_statistic == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("D equals brute force exactly on random small samples") {
  Rng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_sample(rng, 20, 20);
    auto b = random_sample(rng, 20, 20);
    auto r = ks_two_sample(a, b);
    CHECK(r.d_statistic == brute_force_d(a, b));  // exact, same division results
  }
}

TEST_CASE("ks is symmetric in its arguments") {
  Rng rng(5);
  for (int i = 0; i < 100; ++i) {
    auto a = random_sample(rng, 15, 10);
    auto b = random_sample(rng, 15, 10);
    auto r1 = ks_two_sample(a, b);
    auto r2 = ks_two_sample(b, a);
    CHECK(r1.d_statistic == r2.d_statistic);
    CHECK(r1.p_value == r2.p_value);
  }
}

TEST_CASE("D is invariant under strictly monotone transforms") {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    auto a = random_sample(rng, 15, 10);
    auto b = random_sample(rng, 15, 10);
    auto f = [](double x) { return std::exp(x / 3.0) + x; };
    std::vector<double> fa(a.size()), fb(b.size());
    std::transform(a.begin(), a.end(), fa.begin(), f);
    std::transform(b.begin(), b.end(), fb.begin(), f);
    CHECK(ks_two_sample(a, b).d_statistic == ks_two_sample(fa, fb).d_statistic);
  }
}

TEST_CASE("p is monotone non-increasing in D at fixed sizes") {
  double last_p = 1.0;
  for (int k = 0; k <= 20; ++k) {
    double d = static_cast<double>(k) / 20.0;
    double ne = 30.0 * 40.0 / 70.0;
    double p = kolmogorov_sf(std::sqrt(ne) * d);
    CHECK(p <= last_p + 1e-15);
    last_p = p;
  }
}

TEST_CASE("empty samples are rejected") {
  std::vector<double> a = {1.0};
  std::vector<double> empty;
  CHECK_THROWS_AS(ks_two_sample(a, empty), EmptySample);
  CHECK_THROWS_AS(quartiles(empty), EmptySample);
}

TEST_CASE("median of 1..5 is 3") {
  std::vector<double> v = {5, 1, 4, 2, 3};
  auto q = quartiles(v);
  CHECK(q.median == 3.0);
  CHECK(q.q1 == 2.0);
  CHECK(q.q3 == 4.0);
}

TEST_CASE("constant sample collapses quartiles and whiskers") {
  std::vector<double> v(9, 7.5);
  auto q = quartiles(v);
  CHECK(q.q1 == 7.5);
  CHECK(q.median == 7.5);
  CHECK(q.q3 == 7.5);
  CHECK(q.whisker_lo == 7.5);
  CHECK(q.whisker_hi == 7.5);
}

TEST_CASE("quartiles match a naive sort-and-index oracle") {
  Rng rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> v(100);
    for (auto& x : v) x = rng.uniform_double() * 1000.0;
    auto q = quartiles(v);

    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    auto naive = [&](double p) {
      double pos = p * static_cast<double>(sorted.size() - 1);
      auto lo = static_cast<std::size_t>(pos);
      double frac = pos - static_cast<double>(lo);
      if (lo + 1 >= sorted.size()) return sorted.back();
      return sorted[lo] * (1 - frac) + sorted[lo + 1] * frac;
    };
    CHECK(q.q1 == doctest::Approx(naive(0.25)).epsilon(1e-12));
    CHECK(q.median == doctest::Approx(naive(0.5)).epsilon(1e-12));
    CHECK(q.q3 == doctest::Approx(naive(0.75)).epsilon(1e-12));
    CHECK(q.q1 <= q.median);
    CHECK(q.median <= q.q3);

    double iqr = q.q3 - q.q1;
    double lo_w = sorted.back(), hi_w = sorted.front();
    for (double x : sorted) {
      if (x >= q.q1 - 1.5 * iqr) {
        lo_w = std::min(lo_w, x);
      }
      if (x <= q.q3 + 1.5 * iqr) hi_w = std::max(hi_w, x);
    }
    CHECK(q.whisker_lo == lo_w);
    CHECK(q.whisker_hi == hi_w);
  }
}
