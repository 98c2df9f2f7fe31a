#pragma once

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "dmflow/clustering.hpp"
#include "dmflow/common.hpp"
#include "dmflow/ego_network.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/markets.hpp"
#include "dmflow/prices.hpp"
#include "dmflow/stats.hpp"

namespace dmflow {

struct ClosureEvent {
  std::string market;
  Day closure_date = 0;
  std::vector<std::string> coexisting;  // active on closure_date, name order
};

// One event per closed roster market, ordered by (closure_date, name).
std::vector<ClosureEvent> closure_events(const std::vector<MarketInfo>& roster);

// Uniform-choice probability that the rank-i market receives a closure's
// migrants: P_i = (sum over closures with c_j >= i of 1/c_j) / m.
// Index 0 holds P_1. Throws NoCoexistingMarkets if any closure has none.
std::vector<double> null_model(const std::vector<ClosureEvent>& closures);

struct MigrationOptions {
  int horizon_days = 7;        // migrant window for absorption / rankings
  int flows_horizon_days = 30; // migrant window for the flow matrix
  int share_window_days = 7;   // trailing window of the share series
  int series_span_days = 28;   // offsets reported around each closure
  bool exclude_exchange_edges = true;
};

struct MigrantRecord {
  EntityId user = kNoEntity;
  std::vector<std::size_t> destinations;  // roster indices, ascending
  Day first_migration_day = 0;            // earliest coexisting-market contact
};

struct FlowEntry {
  std::string closed_market;
  std::string destination;
  std::size_t migrants = 0;
};

// Daily series of offsets [-span, +span] around a closure; NaN marks days
// the value is undefined (empty base week).
struct ReturningSeries {
  int span = 0;
  std::vector<double> normalized;  // size 2*span+1, value 1 at offset 0

  double at_offset(int offset) const {
    return normalized[static_cast<std::size_t>(offset + span)];
  }
};

struct GroupStats {
  std::size_t n = 0;
  double mean = 0.0;
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
};

struct ActivityComparison {
  GroupStats migrants_total, non_migrants_total;  // volume with anyone
  GroupStats migrants_home, non_migrants_home;    // volume with home market
  KsResult ks_total, ks_home;
};

enum class RankCriterion { common_users, total_volume };

std::string to_string(RankCriterion c);

struct RankingOutcome {
  // Candidate markets in rank order (best first): (name, criterion value).
  std::vector<std::pair<std::string, double>> ranking;
  std::optional<int> chosen_rank;  // 1-based rank of the modal destination
  std::string top_destination;    // modal destination (empty when no migrants)
};

struct AbsorptionStats {
  double top_share = 0.0;           // migrants touching the modal destination
  double multi_dest_fraction = 0.0; // migrants with >= 2 destinations
  std::string modal_destination;
  std::size_t migrants = 0;
};

struct ShareSeries {
  int span = 0;
  std::string closed_market, dest1, dest2;
  std::vector<double> closed_share, dest1_share, dest2_share;  // NaN when idle
};

struct ShareBand {
  std::vector<double> median, q1, q3;  // size 2*span+1
};

struct AggregatedShares {
  int span = 0;
  ShareBand closed, dest1, dest2;
};

class MigrationDataset;

// Single chronological pass collecting everything the closure analyses need:
// per-entity market contacts, pre-closure volume snapshots, daily activity
// around closures and the per-market daily volume matrix. Memory scales with
// entities and contacts, not transactions.
class MigrationScan {
 public:
  MigrationScan(const std::vector<MarketInfo>& roster,
                const EntityPartition& partition, const PriceSeries* prices,
                MigrationOptions options = {});

  void observe(const LedgerTx& tx);
  MigrationDataset finish() &&;

 private:
  void snapshot_due(Day now);
  void flush_day_sets(Day now);

  const std::vector<MarketInfo>& roster_;
  const EntityPartition& partition_;
  const PriceSeries* prices_;
  MigrationOptions options_;

  std::vector<ClosureEvent> closures_;
  std::vector<std::size_t> closure_market_idx_;
  std::size_t next_snapshot_ = 0;
  Timestamp last_ts_ = std::numeric_limits<Timestamp>::min();

  std::vector<int> entity_market_;  // roster index + 1, 0 = none, -1 = exchange
  std::unordered_map<EntityId, std::vector<std::pair<std::uint16_t, Day>>> contacts_;
  std::vector<std::vector<EntityId>> users_by_market_;
  std::vector<double> total_usd_;  // running per-entity exchanged volume
  std::unordered_map<std::uint64_t, double> home_usd_;  // (entity, market)

  struct Snapshot {
    std::vector<std::uint32_t> users_prefix;  // per market
    std::vector<double> user_total;           // aligned with closed market's users
    std::vector<double> user_home;
  };
  std::vector<Snapshot> snapshots_;

  // Market x day USD volume, anchored at the first observed day.
  Day matrix_anchor_ = 0;
  bool matrix_anchored_ = false;
  std::vector<std::vector<double>> market_daily_usd_;

  std::unordered_set<Day> wanted_days_;
  std::map<Day, std::vector<EntityId>> daily_active_;
  std::unordered_set<EntityId> current_day_set_;
  Day current_day_ = 0;
  bool have_current_day_ = false;

  friend class MigrationDataset;
};

class MigrationDataset {
 public:
  const std::vector<ClosureEvent>& closures() const { return closures_; }
  const MigrationOptions& options() const { return options_; }
  const std::vector<MarketInfo>& roster() const { return roster_; }

  // Users of the closed market whose first coexisting-market contact falls
  // strictly after the closure and within `horizon_days`; users with any
  // other-market contact before the closure are excluded.
  // Throws NoCoexistingMarkets.
  std::vector<MigrantRecord> identify_migrants(std::size_t closure_idx,
                                               int horizon_days) const;

  // Entry per (closed market, destination) with at least one migrant; a
  // k-destination migrant contributes to k entries.
  std::vector<FlowEntry> migration_flows(int horizon_days) const;

  // Fraction of population users active in the week ending at each offset
  // day that are active again in the following week, normalized to 1 at the
  // closure day. Population: pre-closure users of the closed market.
  // Throws InsufficientHistory when the closure-day value is undefined.
  ReturningSeries returning_fraction(std::size_t closure_idx) const;

  static std::vector<double> median_across(const std::vector<ReturningSeries>& series);

  // Pre-closure activity of migrants vs the closed market's other users.
  // Throws EmptyGroup.
  ActivityComparison activity_comparison(std::size_t closure_idx,
                                         const std::vector<MigrantRecord>& migrants) const;

  // Coexisting markets ranked by the criterion on pre-closure data
  // (descending, ties by name); reports the rank of the destination that
  // received the most migrants. Throws NoCoexistingMarkets when exclusions
  // empty the candidate set.
  RankingOutcome destination_ranking(std::size_t closure_idx, RankCriterion criterion,
                                     const std::vector<std::string>& exclusions,
                                     const std::vector<MigrantRecord>& migrants) const;

  // Throws NoMigrants.
  AbsorptionStats absorption_stats(const std::vector<MigrantRecord>& migrants) const;

  // Trailing-week volume share of the closed market and its top-2
  // destinations around the closure.
  ShareSeries market_share_window(std::size_t closure_idx,
                                  const std::vector<MigrantRecord>& migrants) const;

  static AggregatedShares aggregate_shares(const std::vector<ShareSeries>& series);

  // Pre-closure USD volume of a roster market (for rankings and reports).
  double market_volume_before(std::size_t market_idx, Day day) const;

  std::size_t user_count(std::size_t closure_idx) const;

 private:
  friend class MigrationScan;

  std::optional<Day> first_contact(EntityId e, std::size_t market_idx) const;

  std::vector<std::size_t> coexisting_indices(std::size_t closure_idx) const;

  // Entities of the closed market's user snapshot, with their volumes.
  struct ClosureUsers {
    std::vector<EntityId> users;
    std::vector<double> total_usd;
    std::vector<double> home_usd;
  };
  ClosureUsers closure_users(std::size_t closure_idx) const;

  std::vector<EntityId> active_window(Day begin, Day end,
                                      const std::unordered_set<EntityId>& population) const;

  std::vector<MarketInfo> roster_;
  MigrationOptions options_;
  std::vector<ClosureEvent> closures_;
  std::vector<std::size_t> closure_market_idx_;
  std::unordered_map<std::string, std::size_t> market_index_;

  std::unordered_map<EntityId, std::vector<std::pair<std::uint16_t, Day>>> contacts_;
  std::vector<std::vector<EntityId>> users_by_market_;
  std::vector<MigrationScan::Snapshot> snapshots_;

  Day matrix_anchor_ = 0;
  std::vector<std::vector<double>> market_daily_usd_;
  std::map<Day, std::vector<EntityId>> daily_active_;
};

// In-memory convenience wrapper over MigrationScan.
MigrationDataset build_migration_dataset(const Ledger& ledger,
                                         const EntityPartition& partition,
                                         const PriceSeries* prices,
                                         const std::vector<MarketInfo>& roster,
                                         MigrationOptions options = {});

}  // namespace dmflow
