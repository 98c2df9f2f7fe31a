#pragma once

#include <memory>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "dmflow/clustering.hpp"
#include "dmflow/common.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/markets.hpp"
#include "dmflow/prices.hpp"

namespace dmflow {

// Gap-free weekly values; week 0 starts on a Monday and missing weeks hold 0.
struct WeeklySeries {
  Day first_week_start = 0;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
  bool empty() const { return values.empty(); }
  Day week_start(std::size_t i) const {
    return first_week_start + static_cast<Day>(7 * i);
  }
  // Index of the week containing day d, if within range.
  std::optional<std::size_t> index_of_day(Day d) const;
};

// Accumulates (day, value) observations into Monday-aligned weekly buckets.
class WeeklyAccumulator {
 public:
  explicit WeeklyAccumulator(Day anchor)
      : anchor_(monday_on_or_before(anchor)) {}

  void add(Day d, double value);
  void extend_through(Day d);  // ensure the bucket for day d exists
  WeeklySeries take() &&;

 private:
  Day anchor_;
  std::vector<double> values_;
};

struct ResilienceSeries {
  WeeklySeries active_markets;
  WeeklySeries volume_markets_usd;  // market-incident transfer USD
  WeeklySeries volume_ego_usd;      // full ego-dataset transfer USD
  WeeklySeries unique_users;        // distinct entities with a market edge
};

class FirstMarketContact;

// Streaming accumulator behind weekly_series: feed transactions in
// (timestamp, tx_id) order, then finish() against a market roster. Weeks
// align to the Monday of the first observed day unless anchored explicitly.
class WeeklyResilienceBuilder {
 public:
  WeeklyResilienceBuilder(const EntityPartition& partition, const PriceSeries* prices,
                          const FirstMarketContact& contacts,
                          bool exclude_exchange_edges = true,
                          std::optional<Day> anchor = std::nullopt);
  ~WeeklyResilienceBuilder();

  void observe(const LedgerTx& tx);
  ResilienceSeries finish(const std::vector<MarketInfo>& roster,
                          std::optional<std::pair<Day, Day>> range = std::nullopt);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// All three Figure-3 style indicators plus the ego-scope volume variant.
// Weeks span `range` when given, else the ledger's own span; weeks align to
// the Monday of the range start. Exchange-incident edges are skipped when
// `exclude_exchange_edges` is set.
ResilienceSeries weekly_series(const Ledger& ledger, const EntityPartition& partition,
                               const PriceSeries* prices,
                               const std::vector<MarketInfo>& roster,
                               std::optional<std::pair<Day, Day>> range = std::nullopt,
                               bool exclude_exchange_edges = true);

// Weekly count of roster markets whose operating interval overlaps each week.
WeeklySeries weekly_market_count(const std::vector<MarketInfo>& roster, Day range_begin,
                                 Day range_end);

// Recursive EMA seeded with the first observation, alpha = 2/(span+1).
// Throws EmptySeries; span must be >= 1.
std::vector<double> ema(std::span<const double> series, int span);

struct MacdResult {
  std::vector<double> macd_line;
  std::vector<double> signal_line;
  std::vector<double> histogram;
  bool short_input = false;  // input shorter than the slow span (26)
};

// macd = ema(x,12) - ema(x,26); signal = ema(macd,9); histogram = difference.
MacdResult macd(std::span<const double> series);

// Daily interpolation of a weekly series: each week's value is anchored to
// its midweek day (week start + 3) and interpolated linearly; flat beyond
// the terminal anchors.
double interpolate_weekly(const WeeklySeries& series, Day d);

struct RecoveryResult {
  bool recovered = false;
  int days = 0;
  double baseline = 0.0;
};

// Days until the daily-interpolated volume first regains the pre-closure
// baseline (mean of the `baseline_weeks` full weeks before the closure
// week). Not recovered when the series ends below baseline.
// Throws OutOfRange when the closure lies outside the series or has no
// pre-closure history.
RecoveryResult recovery_time(const WeeklySeries& volume, Day closure_date,
                             int baseline_weeks = 4);

}  // namespace dmflow
