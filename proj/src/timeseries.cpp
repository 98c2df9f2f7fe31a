#include "dmflow/timeseries.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_set>

#include "dmflow/ego_network.hpp"
#include "dmflow/errors.hpp"

namespace dmflow {

std::optional<std::size_t> WeeklySeries::index_of_day(Day d) const {
  if (values.empty() || d < first_week_start) return std::nullopt;
  auto idx = static_cast<std::size_t>((d - first_week_start) / 7);
  if (idx >= values.size()) return std::nullopt;
  return idx;
}

void WeeklyAccumulator::add(Day d, double value) {
  extend_through(d);
  values_[static_cast<std::size_t>((d - anchor_) / 7)] += value;
}

void WeeklyAccumulator::extend_through(Day d) {
  if (d < anchor_) {
    throw OutOfRange("day " + format_date(d) + " precedes series anchor " +
                     format_date(anchor_));
  }
  auto idx = static_cast<std::size_t>((d - anchor_) / 7);
  if (idx >= values_.size()) values_.resize(idx + 1, 0.0);
}

WeeklySeries WeeklyAccumulator::take() && {
  return WeeklySeries{anchor_, std::move(values_)};
}

WeeklySeries weekly_market_count(const std::vector<MarketInfo>& roster,
                                 Day range_begin, Day range_end) {
  WeeklyAccumulator acc(range_begin);
  acc.extend_through(range_end);
  WeeklySeries series = std::move(acc).take();
  for (std::size_t i = 0; i < series.size(); ++i) {
    Day ws = series.week_start(i);
    int count = 0;
    for (const auto& m : roster) {
      // Overlap of [start, end) with [ws, ws+7).
      Day m_end = m.end ? *m.end : std::numeric_limits<Day>::max();
      if (m.start < ws + 7 && m_end > ws) ++count;
    }
    series.values[i] = count;
  }
  return series;
}

struct WeeklyResilienceBuilder::Impl {
  const EntityPartition& partition;
  const PriceSeries* prices;
  const FirstMarketContact& contacts;
  bool exclude_exchanges;
  std::optional<Day> anchor;

  bool anchored = false;
  Day anchor_monday = 0;
  Day first_day = 0, last_day = 0;
  std::vector<double> vol_markets, vol_ego, users;
  // Distinct weekly users: one scratch set for the in-flight week, flushed
  // to a plain count once the scan advances.
  std::unordered_set<EntityId> current_users;
  std::size_t current_week = 0;

  std::size_t week_of(Day d) {
    return static_cast<std::size_t>((d - anchor_monday) / 7);
  }

  void ensure(Day d) {
    if (!anchored) {
      anchor_monday = monday_on_or_before(anchor.value_or(d));
      if (d < anchor_monday) {
        throw OutOfRange("transaction precedes the configured week anchor");
      }
      anchored = true;
      first_day = last_day = d;
    }
    first_day = std::min(first_day, d);
    last_day = std::max(last_day, d);
    std::size_t w = week_of(d);
    if (w >= vol_markets.size()) {
      vol_markets.resize(w + 1, 0.0);
      vol_ego.resize(w + 1, 0.0);
      users.resize(w + 1, 0.0);
    }
    if (w != current_week) {
      flush_users();
      current_week = w;
    }
  }

  void flush_users() {
    if (!current_users.empty() && current_week < users.size()) {
      users[current_week] = static_cast<double>(current_users.size());
      current_users.clear();
    }
  }

  void observe(const LedgerTx& tx) {
    Day d = day_of(tx.timestamp);
    ensure(d);
    std::size_t w = week_of(d);
    auto is_exchange = [&](EntityId e) {
      return partition.has_kind(e, TagKind::exchange);
    };
    for_each_transfer(tx, partition, prices, [&](const EntityEdge& e) {
      if (exclude_exchanges && (is_exchange(e.src) || is_exchange(e.dst))) return;
      bool src_market = contacts.is_market(e.src);
      bool dst_market = contacts.is_market(e.dst);
      bool market_incident = src_market || dst_market;
      if (market_incident) {
        vol_markets[w] += e.usd;
        if (!src_market) current_users.insert(e.src);
        if (!dst_market) current_users.insert(e.dst);
      }
      bool ego_scope = market_incident;
      if (!ego_scope) {
        auto fs = contacts.first(e.src);
        auto fd = contacts.first(e.dst);
        ego_scope = (fs && e.timestamp >= *fs) || (fd && e.timestamp >= *fd);
      }
      if (ego_scope) vol_ego[w] += e.usd;
    });
  }

  ResilienceSeries finish(const std::vector<MarketInfo>& roster,
                          std::optional<std::pair<Day, Day>> range) {
    if (range && !anchored) {
      anchor_monday = monday_on_or_before(anchor.value_or(range->first));
      anchored = true;
      first_day = range->first;
      last_day = range->second;
    }
    if (!anchored) throw EmptySeries();
    flush_users();
    Day begin = range ? range->first : first_day;
    Day end = range ? range->second : last_day;
    if (end < begin) throw OutOfRange("empty series range");
    std::size_t weeks = week_of(end) + 1;
    vol_markets.resize(weeks, 0.0);
    vol_ego.resize(weeks, 0.0);
    users.resize(weeks, 0.0);

    ResilienceSeries out;
    out.active_markets = weekly_market_count(roster, anchor_monday, end);
    out.volume_markets_usd = WeeklySeries{anchor_monday, std::move(vol_markets)};
    out.volume_ego_usd = WeeklySeries{anchor_monday, std::move(vol_ego)};
    out.unique_users = WeeklySeries{anchor_monday, std::move(users)};
    return out;
  }
};

WeeklyResilienceBuilder::WeeklyResilienceBuilder(const EntityPartition& partition,
                                                 const PriceSeries* prices,
                                                 const FirstMarketContact& contacts,
                                                 bool exclude_exchange_edges,
                                                 std::optional<Day> anchor)
    : impl_(std::make_unique<Impl>(Impl{partition, prices, contacts,
                                        exclude_exchange_edges, anchor})) {}

WeeklyResilienceBuilder::~WeeklyResilienceBuilder() = default;

void WeeklyResilienceBuilder::observe(const LedgerTx& tx) { impl_->observe(tx); }

ResilienceSeries WeeklyResilienceBuilder::finish(
    const std::vector<MarketInfo>& roster,
    std::optional<std::pair<Day, Day>> range) {
  return impl_->finish(roster, range);
}

ResilienceSeries weekly_series(const Ledger& ledger, const EntityPartition& partition,
                               const PriceSeries* prices,
                               const std::vector<MarketInfo>& roster,
                               std::optional<std::pair<Day, Day>> range,
                               bool exclude_exchange_edges) {
  FirstMarketContact contact(partition);
  for (const auto& tx : ledger.transactions()) contact.observe(tx, partition);

  std::optional<Day> anchor;
  if (range) anchor = range->first;
  WeeklyResilienceBuilder builder(partition, prices, contact, exclude_exchange_edges,
                                  anchor);
  Day begin, end;
  if (range) {
    begin = range->first;
    end = range->second;
  } else if (!ledger.empty()) {
    begin = day_of(ledger.first_timestamp());
    end = day_of(ledger.last_timestamp());
  } else {
    throw EmptySeries();
  }
  for (const auto& tx : ledger.transactions()) {
    Day d = day_of(tx.timestamp);
    if (d < begin || d > end) continue;
    builder.observe(tx);
  }
  return builder.finish(roster, std::make_pair(begin, end));
}

std::vector<double> ema(std::span<const double> series, int span) {
  if (series.empty()) throw EmptySeries();
  if (span < 1) throw ValidationError("ema span must be >= 1");
  double alpha = 2.0 / (static_cast<double>(span) + 1.0);
  std::vector<double> out(series.size());
  out[0] = series[0];
  for (std::size_t i = 1; i < series.size(); ++i) {
    out[i] = alpha * series[i] + (1.0 - alpha) * out[i - 1];
  }
  return out;
}

MacdResult macd(std::span<const double> series) {
  if (series.empty()) throw EmptySeries();
  MacdResult r;
  r.short_input = series.size() < 26;
  auto fast = ema(series, 12);
  auto slow = ema(series, 26);
  r.macd_line.resize(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    r.macd_line[i] = fast[i] - slow[i];
  }
  r.signal_line = ema(r.macd_line, 9);
  r.histogram.resize(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    r.histogram[i] = r.macd_line[i] - r.signal_line[i];
  }
  return r;
}

double interpolate_weekly(const WeeklySeries& series, Day d) {
  if (series.empty()) throw EmptySeries();
  Day first_anchor = series.first_week_start + 3;
  Day last_anchor = series.week_start(series.size() - 1) + 3;
  if (d <= first_anchor) return series.values.front();
  if (d >= last_anchor) return series.values.back();
  auto k = static_cast<std::size_t>((d - first_anchor) / 7);
  Day left = first_anchor + static_cast<Day>(7 * k);
  double frac = static_cast<double>(d - left) / 7.0;
  return series.values[k] + frac * (series.values[k + 1] - series.values[k]);
}

RecoveryResult recovery_time(const WeeklySeries& volume, Day closure_date,
                             int baseline_weeks) {
  auto closure_week = volume.index_of_day(closure_date);
  if (!closure_week) {
    throw OutOfRange("closure date " + format_date(closure_date) +
                     " outside volume series");
  }
  if (*closure_week == 0) {
    throw OutOfRange("no pre-closure history before " + format_date(closure_date));
  }
  std::size_t n_base = std::min<std::size_t>(*closure_week,
                                             static_cast<std::size_t>(baseline_weeks));
  double baseline = 0.0;
  for (std::size_t i = *closure_week - n_base; i < *closure_week; ++i) {
    baseline += volume.values[i];
  }
  baseline /= static_cast<double>(n_base);

  RecoveryResult r;
  r.baseline = baseline;
  Day last_anchor = volume.week_start(volume.size() - 1) + 3;
  for (Day d = closure_date; d <= last_anchor; ++d) {
    if (interpolate_weekly(volume, d) >= baseline) {
      r.recovered = true;
      r.days = d - closure_date;
      return r;
    }
  }
  return r;  // series ends below baseline
}

}  // namespace dmflow
