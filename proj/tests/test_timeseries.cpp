#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "dmflow/ego_network.hpp"
#include "dmflow/errors.hpp"
#include "dmflow/rng.hpp"
#include "dmflow/synth.hpp"
#include "dmflow/timeseries.hpp"
#include "test_util.hpp"

using namespace dmflow;
using dmflow::testing::make_tx;

namespace {

std::vector<double> unrolled_ema(const std::vector<double>& x, int span) {
  double alpha = 2.0 / (span + 1.0);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (i == 0) {
      out[0] = x[0];
    } else {
      out[i] = alpha * x[i] + (1 - alpha) * out[i - 1];
    }
  }
  return out;
}

}  // namespace

TEST_CASE("weekly market count from roster intervals") {
  auto roster = reference_roster();
  Day probe = parse_date("2019-01-01");
  auto series = weekly_market_count(roster, probe - 14, probe + 14);
  auto idx = series.index_of_day(probe);
  REQUIRE(idx.has_value());
  // Nine roster markets operate across 2019-01-01.
  CHECK(series.values[*idx] == 9.0);
}

TEST_CASE("one always-active market with no transactions") {
  std::vector<MarketInfo> roster(1);
  roster[0].name = "M";
  roster[0].start = parse_date("2020-01-01");
  roster[0].reason = CloseReason::active;

  Ledger empty;
  EntityPartition no_entities;
  auto day0 = parse_date("2020-02-03");
  auto series = weekly_series(empty, no_entities, nullptr, roster,
                              std::make_pair(day0, day0 + 70));
  for (double v : series.active_markets.values) CHECK(v == 1.0);
  for (double v : series.volume_markets_usd.values) CHECK(v == 0.0);
  for (double v : series.unique_users.values) CHECK(v == 0.0);
}

TEST_CASE("weekly series equal a naive per-week recount") {
  auto cfg = scenario_library().at("dropout-15");
  cfg.users = 400;
  cfg.end = parse_date("2020-06-29");
  for (auto& m : cfg.markets) {
    if (m.end && *m.end >= cfg.end) {
      m.end.reset();
      m.reason = CloseReason::active;
    }
  }
  auto data = generate(cfg);
  auto base = co_spend_cluster(data.ledger);
  auto part = apply_change_links(
      data.ledger, tag_entities(base, data.seeds, data.ledger.addresses()));

  auto series = weekly_series(data.ledger, part, &data.prices, data.roster);

  // Naive recount: bucket every market-incident edge by week.
  Day anchor = series.volume_markets_usd.first_week_start;
  std::map<std::size_t, double> vol;
  std::map<std::size_t, std::set<EntityId>> users;
  auto is_kind = [&](EntityId e, TagKind k) { return part.has_kind(e, k); };
  for (const auto& tx : data.ledger.transactions()) {
    for_each_transfer(tx, part, &data.prices, [&](const EntityEdge& e) {
      if (is_kind(e.src, TagKind::exchange) || is_kind(e.dst, TagKind::exchange)) {
        return;
      }
      bool sm = is_kind(e.src, TagKind::market), dm = is_kind(e.dst, TagKind::market);
      if (!sm && !dm) return;
      auto week = static_cast<std::size_t>((day_of(e.timestamp) - anchor) / 7);
      vol[week] += e.usd;
      if (!sm) users[week].insert(e.src);
      if (!dm) users[week].insert(e.dst);
    });
  }
  for (std::size_t w = 0; w < series.volume_markets_usd.size(); ++w) {
    double expect = vol.count(w) ? vol[w] : 0.0;
    CHECK(series.volume_markets_usd.values[w] == doctest::Approx(expect).epsilon(1e-9));
    double expect_users = users.count(w) ? static_cast<double>(users[w].size()) : 0.0;
    CHECK(series.unique_users.values[w] == expect_users);
  }

  SUBCASE("weekly totals conserve the whole-range totals") {
    double weekly_sum = 0.0;
    for (double v : series.volume_markets_usd.values) weekly_sum += v;
    double direct = 0.0;
    for (const auto& [w, v] : vol) direct += v;
    CHECK(weekly_sum == doctest::Approx(direct).epsilon(1e-9));
  }
}

TEST_CASE("ema of a constant series is the constant") {
  std::vector<double> x(40, 3.25);
  for (double v : ema(x, 12)) CHECK(v == doctest::Approx(3.25));
}

TEST_CASE("ema with span 1 is the identity") {
  std::vector<double> x = {5, 2, 9, 4};
  CHECK(ema(x, 1) == x);
}

TEST_CASE("ema matches the unrolled recurrence on random series") {
  Rng rng(11);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> x(50);
    for (auto& v : x) v = rng.uniform_double() * 100.0;
    for (int span : {3, 9, 12, 26}) {
      auto got = ema(x, span);
      auto want = unrolled_ema(x, span);
      for (std::size_t i = 0; i < x.size(); ++i) {
        CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("ema stays inside the running min/max envelope") {
  Rng rng(12);
  std::vector<double> x(80);
  for (auto& v : x) v = rng.uniform_double() * 50.0 - 25.0;
  auto out = ema(x, 9);
  double lo = x[0], hi = x[0];
  for (std::size_t i = 0; i < x.size(); ++i) {
    lo = std::min(lo, x[i]);
    hi = std::max(hi, x[i]);
    CHECK(out[i] >= lo - 1e-12);
    CHECK(out[i] <= hi + 1e-12);
  }
}

TEST_CASE("ema rejects empty input") {
  std::vector<double> empty;
  CHECK_THROWS_AS(ema(empty, 12), EmptySeries);
  CHECK_THROWS_AS(macd(empty), EmptySeries);
}

TEST_CASE("macd of a constant series is identically zero") {
  std::vector<double> x(52, 1234.5);
  auto r = macd(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(r.macd_line[i] == 0.0);
    CHECK(r.signal_line[i] == 0.0);
    CHECK(r.histogram[i] == 0.0);
  }
  CHECK_FALSE(r.short_input);
}

TEST_CASE("macd histogram identity holds bit-for-bit") {
  Rng rng(13);
  std::vector<double> x(60);
  for (auto& v : x) v = rng.uniform_double() * 1000.0;
  auto r = macd(x);
  for (std::size_t i = 0; i < x.size(); ++i) {
    CHECK(r.histogram[i] == r.macd_line[i] - r.signal_line[i]);
  }
}

TEST_CASE("macd of a linear ramp turns positive past warm-up") {
  std::vector<double> x(60);
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  auto r = macd(x);
  auto fast = unrolled_ema(x, 12);
  auto slow = unrolled_ema(x, 26);
  for (std::size_t i = 30; i < x.size(); ++i) {
    CHECK(r.macd_line[i] > 0.0);
    CHECK(r.macd_line[i] == doctest::Approx(fast[i] - slow[i]).epsilon(1e-12));
  }
}

TEST_CASE("short inputs are flagged") {
  std::vector<double> x(10, 1.0);
  CHECK(macd(x).short_input);
}

TEST_CASE("recovery: series already at baseline returns 0 days") {
  WeeklySeries s;
  s.first_week_start = parse_date("2020-01-06");
  s.values.assign(20, 700.0);
  auto r = recovery_time(s, parse_date("2020-03-02"));
  CHECK(r.recovered);
  CHECK(r.days == 0);
  CHECK(r.baseline == doctest::Approx(700.0));
}

TEST_CASE("recovery: permanent collapse is reported as not recovered") {
  WeeklySeries s;
  s.first_week_start = parse_date("2020-01-06");
  s.values.assign(10, 700.0);
  s.values.resize(30, 0.0);  // drops to zero forever
  Day closure = s.first_week_start + 10 * 7;
  auto r = recovery_time(s, closure);
  CHECK_FALSE(r.recovered);
}

TEST_CASE("recovery: closure outside the series raises") {
  WeeklySeries s;
  s.first_week_start = parse_date("2020-01-06");
  s.values.assign(10, 1.0);
  CHECK_THROWS_AS(recovery_time(s, s.first_week_start - 7), OutOfRange);
  CHECK_THROWS_AS(recovery_time(s, s.first_week_start + 200 * 7), OutOfRange);
}

TEST_CASE("scripted 10-day recovery is estimated within one day") {
  // Weekly volume: baseline V, then a closure week at 0.3V, a transition
  // week at (3*0.3 + 4*1.6)/7 V and a plateau at 1.6V; daily volumes drop to
  // 0.3x for days 0..9 and jump to 1.6x from day 10 on.
  const double v = 7000.0;
  WeeklySeries s;
  s.first_week_start = parse_date("2020-01-06");
  for (int i = 0; i < 20; ++i) s.values.push_back(v);
  Day closure = s.first_week_start + 20 * 7;  // Monday-aligned closure
  s.values.push_back(0.3 * v);
  s.values.push_back((3 * 0.3 + 4 * 1.6) / 7 * v);
  for (int i = 0; i < 10; ++i) s.values.push_back(1.6 * v);
  auto r = recovery_time(s, closure);
  CHECK(r.recovered);
  CHECK(r.days >= 9);
  CHECK(r.days <= 11);
}

TEST_CASE("generated recovery scenario recovers in 10 +/- 1 days with MACD dip") {
  auto cfg = scenario_library().at("recovery-10");
  cfg.users = 600;
  auto data = generate(cfg);
  auto part = apply_change_links(
      data.ledger, tag_entities(co_spend_cluster(data.ledger), data.seeds,
                                data.ledger.addresses()));
  auto series = weekly_series(data.ledger, part, &data.prices, data.roster);

  Day closure = parse_date("2020-06-01");
  auto r = recovery_time(series.volume_markets_usd, closure);
  CHECK(r.recovered);
  CHECK(r.days >= 9);
  CHECK(r.days <= 11);

  // MACD histogram dips below zero within two weeks of the closure and
  // returns above zero afterwards.
  auto m = macd(series.volume_markets_usd.values);
  auto closure_week = series.volume_markets_usd.index_of_day(closure);
  REQUIRE(closure_week.has_value());
  double min_hist = 0.0;
  bool later_positive = false;
  for (std::size_t i = *closure_week; i < m.histogram.size(); ++i) {
    if (i <= *closure_week + 2) min_hist = std::min(min_hist, m.histogram[i]);
    if (i > *closure_week + 2) later_positive |= m.histogram[i] > 0.0;
  }
  CHECK(min_hist < 0.0);
  CHECK(later_positive);
}
