#include "dmflow/migration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "dmflow/errors.hpp"

namespace dmflow {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();

std::uint64_t pair_key(EntityId e, std::size_t market) {
  return (static_cast<std::uint64_t>(e) << 16) | static_cast<std::uint64_t>(market);
}

GroupStats group_stats(const std::vector<double>& values) {
  GroupStats g;
  g.n = values.size();
  if (values.empty()) return g;
  g.mean = mean(values);
  Quartiles q = quartiles(values);
  g.q1 = q.q1;
  g.median = q.median;
  g.q3 = q.q3;
  return g;
}

}  // namespace

std::string to_string(RankCriterion c) {
  return c == RankCriterion::common_users ? "common_users" : "total_volume";
}

std::vector<ClosureEvent> closure_events(const std::vector<MarketInfo>& roster) {
  std::vector<ClosureEvent> events;
  for (const auto& m : roster) {
    if (!m.end) continue;
    ClosureEvent e;
    e.market = m.name;
    e.closure_date = *m.end;
    for (const auto& other : roster) {
      if (other.name == m.name) continue;
      if (other.active_on(e.closure_date)) e.coexisting.push_back(other.name);
    }
    std::sort(e.coexisting.begin(), e.coexisting.end());
    events.push_back(std::move(e));
  }
  std::sort(events.begin(), events.end(), [](const auto& a, const auto& b) {
    if (a.closure_date != b.closure_date) return a.closure_date < b.closure_date;
    return a.market < b.market;
  });
  return events;
}

std::vector<double> null_model(const std::vector<ClosureEvent>& closures) {
  std::size_t max_rank = 0;
  for (const auto& c : closures) {
    if (c.coexisting.empty()) throw NoCoexistingMarkets(c.market);
    max_rank = std::max(max_rank, c.coexisting.size());
  }
  std::vector<double> p(max_rank, 0.0);
  if (closures.empty()) return p;
  for (const auto& c : closures) {
    double inv = 1.0 / static_cast<double>(c.coexisting.size());
    for (std::size_t i = 0; i < c.coexisting.size(); ++i) p[i] += inv;
  }
  for (double& v : p) v /= static_cast<double>(closures.size());
  return p;
}

MigrationScan::MigrationScan(const std::vector<MarketInfo>& roster,
                             const EntityPartition& partition,
                             const PriceSeries* prices, MigrationOptions options)
    : roster_(roster),
      partition_(partition),
      prices_(prices),
      options_(options),
      closures_(closure_events(roster)) {
  std::unordered_map<std::string_view, std::size_t> by_name;
  for (std::size_t i = 0; i < roster.size(); ++i) by_name[roster[i].name] = i;
  closure_market_idx_.reserve(closures_.size());
  for (const auto& c : closures_) closure_market_idx_.push_back(by_name.at(c.market));

  entity_market_.assign(partition.entity_count(), 0);
  for (EntityId e = 0; e < partition.entity_count(); ++e) {
    const Tag& tag = partition.tag(e);
    if (tag.kind == TagKind::market) {
      auto it = by_name.find(tag.name);
      entity_market_[e] = it == by_name.end() ? -2 : static_cast<int>(it->second) + 1;
    } else if (tag.kind == TagKind::exchange) {
      entity_market_[e] = -1;
    }
  }

  users_by_market_.resize(roster.size());
  total_usd_.assign(partition.entity_count(), 0.0);
  market_daily_usd_.resize(roster.size());

  int pad = options_.series_span_days + 7;
  for (const auto& c : closures_) {
    for (Day d = c.closure_date - pad; d <= c.closure_date + pad; ++d) {
      wanted_days_.insert(d);
    }
  }
}

void MigrationScan::snapshot_due(Day now) {
  while (next_snapshot_ < closures_.size() &&
         closures_[next_snapshot_].closure_date <= now) {
    Snapshot snap;
    snap.users_prefix.resize(users_by_market_.size());
    for (std::size_t m = 0; m < users_by_market_.size(); ++m) {
      snap.users_prefix[m] = static_cast<std::uint32_t>(users_by_market_[m].size());
    }
    std::size_t mi = closure_market_idx_[next_snapshot_];
    const auto& users = users_by_market_[mi];
    snap.user_total.reserve(users.size());
    snap.user_home.reserve(users.size());
    for (EntityId e : users) {
      snap.user_total.push_back(total_usd_[e]);
      auto it = home_usd_.find(pair_key(e, mi));
      snap.user_home.push_back(it == home_usd_.end() ? 0.0 : it->second);
    }
    snapshots_.push_back(std::move(snap));
    ++next_snapshot_;
  }
}

void MigrationScan::flush_day_sets(Day now) {
  if (have_current_day_ && now != current_day_) {
    if (!current_day_set_.empty()) {
      auto& v = daily_active_[current_day_];
      v.assign(current_day_set_.begin(), current_day_set_.end());
      std::sort(v.begin(), v.end());
      current_day_set_.clear();
    }
    have_current_day_ = false;
  }
  if (!have_current_day_) {
    current_day_ = now;
    have_current_day_ = true;
  }
}

void MigrationScan::observe(const LedgerTx& tx) {
  if (tx.timestamp < last_ts_) {
    throw ValidationError("migration scan requires chronological transactions");
  }
  last_ts_ = tx.timestamp;
  Day d = day_of(tx.timestamp);
  if (!matrix_anchored_) {
    matrix_anchor_ = d;
    matrix_anchored_ = true;
  }
  snapshot_due(d);
  flush_day_sets(d);

  bool day_wanted = wanted_days_.count(d) > 0;
  auto day_index = static_cast<std::size_t>(d - matrix_anchor_);

  for_each_transfer(tx, partition_, prices_, [&](const EntityEdge& edge) {
    int src_kind = entity_market_[edge.src];
    int dst_kind = entity_market_[edge.dst];
    if (options_.exclude_exchange_edges && (src_kind == -1 || dst_kind == -1)) {
      return;
    }
    total_usd_[edge.src] += edge.usd;
    total_usd_[edge.dst] += edge.usd;

    auto record_market_volume = [&](int kind) {
      auto mi = static_cast<std::size_t>(kind - 1);
      auto& col = market_daily_usd_[mi];
      if (col.size() <= day_index) col.resize(day_index + 1, 0.0);
      col[day_index] += edge.usd;
    };
    auto record_contact = [&](EntityId user, int market_kind) {
      auto mi = static_cast<std::size_t>(market_kind - 1);
      auto& list = contacts_[user];
      bool first = true;
      for (const auto& [m, day0] : list) {
        if (m == mi) {
          first = false;
          break;
        }
      }
      if (first) {
        list.emplace_back(static_cast<std::uint16_t>(mi), d);
        users_by_market_[mi].push_back(user);
      }
      home_usd_[pair_key(user, mi)] += edge.usd;
      if (day_wanted) current_day_set_.insert(user);
    };

    if (src_kind > 0) record_market_volume(src_kind);
    if (dst_kind > 0) record_market_volume(dst_kind);
    if (src_kind > 0 && dst_kind == 0) record_contact(edge.dst, src_kind);
    if (dst_kind > 0 && src_kind == 0) record_contact(edge.src, dst_kind);
  });
}

MigrationDataset MigrationScan::finish() && {
  snapshot_due(std::numeric_limits<Day>::max());
  flush_day_sets(std::numeric_limits<Day>::max());

  MigrationDataset ds;
  ds.roster_ = roster_;
  ds.options_ = options_;
  ds.closures_ = std::move(closures_);
  ds.closure_market_idx_ = std::move(closure_market_idx_);
  for (std::size_t i = 0; i < ds.roster_.size(); ++i) {
    ds.market_index_[ds.roster_[i].name] = i;
  }
  ds.contacts_ = std::move(contacts_);
  ds.users_by_market_ = std::move(users_by_market_);
  ds.snapshots_ = std::move(snapshots_);
  ds.matrix_anchor_ = matrix_anchored_ ? matrix_anchor_ : 0;
  ds.market_daily_usd_ = std::move(market_daily_usd_);
  ds.daily_active_ = std::move(daily_active_);
  return ds;
}

std::optional<Day> MigrationDataset::first_contact(EntityId e,
                                                   std::size_t market_idx) const {
  auto it = contacts_.find(e);
  if (it == contacts_.end()) return std::nullopt;
  for (const auto& [m, day] : it->second) {
    if (m == market_idx) return day;
  }
  return std::nullopt;
}

std::vector<std::size_t> MigrationDataset::coexisting_indices(
    std::size_t closure_idx) const {
  std::vector<std::size_t> out;
  for (const auto& name : closures_[closure_idx].coexisting) {
    out.push_back(market_index_.at(name));
  }
  return out;
}

MigrationDataset::ClosureUsers MigrationDataset::closure_users(
    std::size_t closure_idx) const {
  const MigrationScan::Snapshot& snap = snapshots_[closure_idx];
  std::size_t mi = closure_market_idx_[closure_idx];
  std::size_t n = snap.users_prefix[mi];
  ClosureUsers r;
  r.users.assign(users_by_market_[mi].begin(),
                 users_by_market_[mi].begin() + static_cast<std::ptrdiff_t>(n));
  r.total_usd = snap.user_total;
  r.home_usd = snap.user_home;
  return r;
}

std::vector<MigrantRecord> MigrationDataset::identify_migrants(
    std::size_t closure_idx, int horizon_days) const {
  const ClosureEvent& closure = closures_[closure_idx];
  if (closure.coexisting.empty()) throw NoCoexistingMarkets(closure.market);
  auto coex = coexisting_indices(closure_idx);
  std::size_t home = closure_market_idx_[closure_idx];
  Day dc = closure.closure_date;

  std::vector<MigrantRecord> migrants;
  auto users = closure_users(closure_idx);
  for (EntityId e : users.users) {
    const auto& list = contacts_.at(e);
    bool excluded = false;
    for (const auto& [m, day] : list) {
      if (m != home && day < dc) {
        excluded = true;
        break;
      }
    }
    if (excluded) continue;

    Day first_coex = std::numeric_limits<Day>::max();
    for (std::size_t mi : coex) {
      if (auto day = first_contact(e, mi)) first_coex = std::min(first_coex, *day);
    }
    if (first_coex <= dc || first_coex > dc + horizon_days) continue;

    MigrantRecord rec;
    rec.user = e;
    rec.first_migration_day = first_coex;
    for (std::size_t mi : coex) {
      if (auto day = first_contact(e, mi)) {
        if (*day > dc && *day <= dc + horizon_days) rec.destinations.push_back(mi);
      }
    }
    std::sort(rec.destinations.begin(), rec.destinations.end());
    migrants.push_back(std::move(rec));
  }
  return migrants;
}

std::vector<FlowEntry> MigrationDataset::migration_flows(int horizon_days) const {
  std::vector<FlowEntry> flows;
  for (std::size_t ci = 0; ci < closures_.size(); ++ci) {
    if (closures_[ci].coexisting.empty()) continue;
    auto migrants = identify_migrants(ci, horizon_days);
    std::map<std::string, std::size_t> counts;
    for (const auto& m : migrants) {
      for (std::size_t dest : m.destinations) ++counts[roster_[dest].name];
    }
    for (const auto& [dest, n] : counts) {
      flows.push_back({closures_[ci].market, dest, n});
    }
  }
  return flows;
}

std::vector<EntityId> MigrationDataset::active_window(
    Day begin, Day end, const std::unordered_set<EntityId>& population) const {
  std::unordered_set<EntityId> seen;
  for (auto it = daily_active_.lower_bound(begin);
       it != daily_active_.end() && it->first <= end; ++it) {
    for (EntityId e : it->second) {
      if (population.count(e)) seen.insert(e);
    }
  }
  return {seen.begin(), seen.end()};
}

ReturningSeries MigrationDataset::returning_fraction(std::size_t closure_idx) const {
  Day dc = closures_[closure_idx].closure_date;
  int span = options_.series_span_days;
  auto users = closure_users(closure_idx);
  std::unordered_set<EntityId> population(users.users.begin(), users.users.end());
  if (population.empty()) {
    throw InsufficientHistory("no users of " + closures_[closure_idx].market +
                              " before closure");
  }

  auto raw_value = [&](Day d) -> double {
    auto base = active_window(d - 6, d, population);
    if (base.empty()) return kNan;
    auto next = active_window(d + 1, d + 7, population);
    std::unordered_set<EntityId> next_set(next.begin(), next.end());
    std::size_t returning = 0;
    for (EntityId e : base) returning += next_set.count(e);
    return static_cast<double>(returning) / static_cast<double>(base.size());
  };

  double at_closure = raw_value(dc);
  if (std::isnan(at_closure) || at_closure <= 0.0) {
    throw InsufficientHistory("returning fraction undefined at closure of " +
                              closures_[closure_idx].market);
  }

  ReturningSeries series;
  series.span = span;
  series.normalized.resize(static_cast<std::size_t>(2 * span + 1), kNan);
  for (int off = -span; off <= span; ++off) {
    double v = raw_value(dc + off);
    series.normalized[static_cast<std::size_t>(off + span)] = v / at_closure;
  }
  return series;
}

std::vector<double> MigrationDataset::median_across(
    const std::vector<ReturningSeries>& series) {
  if (series.empty()) return {};
  std::size_t n = series.front().normalized.size();
  std::vector<double> out(n, kNan);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> vals;
    for (const auto& s : series) {
      if (i < s.normalized.size() && !std::isnan(s.normalized[i])) {
        vals.push_back(s.normalized[i]);
      }
    }
    if (!vals.empty()) out[i] = median(vals);
  }
  return out;
}

ActivityComparison MigrationDataset::activity_comparison(
    std::size_t closure_idx, const std::vector<MigrantRecord>& migrants) const {
  auto users = closure_users(closure_idx);
  std::unordered_set<EntityId> migrant_set;
  for (const auto& m : migrants) migrant_set.insert(m.user);

  std::vector<double> mig_total, mig_home, non_total, non_home;
  for (std::size_t i = 0; i < users.users.size(); ++i) {
    if (migrant_set.count(users.users[i])) {
      mig_total.push_back(users.total_usd[i]);
      mig_home.push_back(users.home_usd[i]);
    } else {
      non_total.push_back(users.total_usd[i]);
      non_home.push_back(users.home_usd[i]);
    }
  }
  if (mig_total.empty() || non_total.empty()) throw EmptyGroup();

  ActivityComparison cmp;
  cmp.migrants_total = group_stats(mig_total);
  cmp.non_migrants_total = group_stats(non_total);
  cmp.migrants_home = group_stats(mig_home);
  cmp.non_migrants_home = group_stats(non_home);
  cmp.ks_total = ks_two_sample(mig_total, non_total);
  cmp.ks_home = ks_two_sample(mig_home, non_home);
  return cmp;
}

double MigrationDataset::market_volume_before(std::size_t market_idx, Day day) const {
  const auto& col = market_daily_usd_[market_idx];
  double sum = 0.0;
  for (std::size_t i = 0; i < col.size(); ++i) {
    if (matrix_anchor_ + static_cast<Day>(i) >= day) break;
    sum += col[i];
  }
  return sum;
}

std::size_t MigrationDataset::user_count(std::size_t closure_idx) const {
  const MigrationScan::Snapshot& snap = snapshots_[closure_idx];
  return snap.users_prefix[closure_market_idx_[closure_idx]];
}

RankingOutcome MigrationDataset::destination_ranking(
    std::size_t closure_idx, RankCriterion criterion,
    const std::vector<std::string>& exclusions,
    const std::vector<MigrantRecord>& migrants) const {
  const ClosureEvent& closure = closures_[closure_idx];
  Day dc = closure.closure_date;

  std::unordered_set<std::string_view> excluded(exclusions.begin(), exclusions.end());
  std::vector<std::size_t> candidates;
  for (const auto& name : closure.coexisting) {
    if (!excluded.count(name)) candidates.push_back(market_index_.at(name));
  }
  if (candidates.empty()) throw NoCoexistingMarkets(closure.market);

  auto users = closure_users(closure_idx);
  std::size_t home = closure_market_idx_[closure_idx];

  RankingOutcome out;
  for (std::size_t mi : candidates) {
    double value = 0.0;
    if (criterion == RankCriterion::total_volume) {
      value = market_volume_before(mi, dc);
    } else {
      std::size_t common = 0;
      for (EntityId e : users.users) {
        if (auto day = first_contact(e, mi); day && *day < dc && mi != home) ++common;
      }
      value = static_cast<double>(common);
    }
    out.ranking.emplace_back(roster_[mi].name, value);
  }
  std::sort(out.ranking.begin(), out.ranking.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  std::map<std::string, std::size_t> dest_counts;
  std::unordered_set<std::size_t> candidate_set(candidates.begin(), candidates.end());
  for (const auto& m : migrants) {
    for (std::size_t dest : m.destinations) {
      if (candidate_set.count(dest)) ++dest_counts[roster_[dest].name];
    }
  }
  if (!dest_counts.empty()) {
    auto modal = dest_counts.begin();
    for (auto it = dest_counts.begin(); it != dest_counts.end(); ++it) {
      if (it->second > modal->second) modal = it;
    }
    out.top_destination = modal->first;
    for (std::size_t i = 0; i < out.ranking.size(); ++i) {
      if (out.ranking[i].first == out.top_destination) {
        out.chosen_rank = static_cast<int>(i) + 1;
        break;
      }
    }
  }
  return out;
}

AbsorptionStats MigrationDataset::absorption_stats(
    const std::vector<MigrantRecord>& migrants) const {
  if (migrants.empty()) throw NoMigrants();
  std::map<std::string, std::size_t> counts;
  std::size_t multi = 0;
  for (const auto& m : migrants) {
    if (m.destinations.size() >= 2) ++multi;
    for (std::size_t dest : m.destinations) ++counts[roster_[dest].name];
  }
  auto modal = counts.begin();
  for (auto it = counts.begin(); it != counts.end(); ++it) {
    if (it->second > modal->second) modal = it;
  }
  AbsorptionStats stats;
  stats.modal_destination = modal->first;
  stats.migrants = migrants.size();
  std::size_t to_modal = 0;
  std::size_t modal_idx = market_index_.at(modal->first);
  for (const auto& m : migrants) {
    if (std::find(m.destinations.begin(), m.destinations.end(), modal_idx) !=
        m.destinations.end()) {
      ++to_modal;
    }
  }
  stats.top_share = static_cast<double>(to_modal) / static_cast<double>(migrants.size());
  stats.multi_dest_fraction =
      static_cast<double>(multi) / static_cast<double>(migrants.size());
  return stats;
}

ShareSeries MigrationDataset::market_share_window(
    std::size_t closure_idx, const std::vector<MigrantRecord>& migrants) const {
  const ClosureEvent& closure = closures_[closure_idx];
  Day dc = closure.closure_date;
  int span = options_.series_span_days;
  int window = options_.share_window_days;

  std::map<std::string, std::size_t> dest_counts;
  for (const auto& m : migrants) {
    for (std::size_t dest : m.destinations) ++dest_counts[roster_[dest].name];
  }
  std::vector<std::pair<std::string, std::size_t>> ordered(dest_counts.begin(),
                                                           dest_counts.end());
  std::sort(ordered.begin(), ordered.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  ShareSeries series;
  series.span = span;
  series.closed_market = closure.market;
  if (!ordered.empty()) series.dest1 = ordered[0].first;
  if (ordered.size() > 1) series.dest2 = ordered[1].first;

  auto trailing = [&](std::size_t mi, Day d) {
    const auto& col = market_daily_usd_[mi];
    double sum = 0.0;
    for (Day k = d - window + 1; k <= d; ++k) {
      auto idx = static_cast<std::ptrdiff_t>(k - matrix_anchor_);
      if (idx >= 0 && idx < static_cast<std::ptrdiff_t>(col.size())) {
        sum += col[static_cast<std::size_t>(idx)];
      }
    }
    return sum;
  };

  std::size_t n = static_cast<std::size_t>(2 * span + 1);
  series.closed_share.assign(n, kNan);
  series.dest1_share.assign(n, kNan);
  series.dest2_share.assign(n, kNan);

  std::size_t closed_idx = closure_market_idx_[closure_idx];
  for (int off = -span; off <= span; ++off) {
    Day d = dc + off;
    double total = 0.0;
    for (std::size_t mi = 0; mi < roster_.size(); ++mi) total += trailing(mi, d);
    if (total <= 0.0) continue;
    auto slot = static_cast<std::size_t>(off + span);
    series.closed_share[slot] = trailing(closed_idx, d) / total;
    if (!series.dest1.empty()) {
      series.dest1_share[slot] = trailing(market_index_.at(series.dest1), d) / total;
    }
    if (!series.dest2.empty()) {
      series.dest2_share[slot] = trailing(market_index_.at(series.dest2), d) / total;
    }
  }
  return series;
}

AggregatedShares MigrationDataset::aggregate_shares(
    const std::vector<ShareSeries>& series) {
  AggregatedShares agg;
  if (series.empty()) return agg;
  agg.span = series.front().span;
  std::size_t n = static_cast<std::size_t>(2 * agg.span + 1);

  auto build = [&](auto member) {
    ShareBand band;
    band.median.assign(n, kNan);
    band.q1.assign(n, kNan);
    band.q3.assign(n, kNan);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> vals;
      for (const auto& s : series) {
        const auto& vec = s.*member;
        if (i < vec.size() && !std::isnan(vec[i])) vals.push_back(vec[i]);
      }
      if (vals.empty()) continue;
      Quartiles q = quartiles(vals);
      band.median[i] = q.median;
      band.q1[i] = q.q1;
      band.q3[i] = q.q3;
    }
    return band;
  };

  agg.closed = build(&ShareSeries::closed_share);
  agg.dest1 = build(&ShareSeries::dest1_share);
  agg.dest2 = build(&ShareSeries::dest2_share);
  return agg;
}

MigrationDataset build_migration_dataset(const Ledger& ledger,
                                         const EntityPartition& partition,
                                         const PriceSeries* prices,
                                         const std::vector<MarketInfo>& roster,
                                         MigrationOptions options) {
  MigrationScan scan(roster, partition, prices, options);
  for (const auto& tx : ledger.transactions()) scan.observe(tx);
  return std::move(scan).finish();
}

}  // namespace dmflow
