#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dmflow/clustering.hpp"
#include "dmflow/common.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/markets.hpp"
#include "dmflow/migration.hpp"
#include "dmflow/prices.hpp"
#include "dmflow/synth.hpp"
#include "dmflow/timeseries.hpp"

namespace dmflow {

struct PipelineConfig {
  std::string ledger_path;
  std::string prices_path;
  std::string seeds_path;
  std::string markets_path;
  std::string out_dir;

  int horizon_days = 7;
  int flows_horizon_days = 30;
  int share_window_days = 7;
  int series_span_days = 28;
  std::vector<std::string> exclude_markets;
  std::optional<Day> week_anchor;  // default: Monday of the first timestamp

  std::string to_json() const;
  static PipelineConfig from_json(const std::string& text);
  static PipelineConfig from_json_file(const std::string& path);
  void validate() const;  // throws BadConfig
};

// Runs the analysis stages over on-disk artifacts with bounded memory:
// every stage streams the ledger file; only the address index, the
// partition and per-entity aggregates are held in memory.
class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  // synth is handled by generate_files(); the remaining stages are:
  void run_cluster();  // partition.csv
  void run_ego();      // ego_<market>_edges.csv / ego_<market>_nodes.csv
  void run_metrics();  // fig3_weekly.csv, macd.csv
  void run_migrate();  // fig4/5/6 CSVs, returning_users.csv, migration_report.json
  void run_report();   // summary.json (requires metrics + migrate state)
  void run_all();      // cluster .. report

  const std::map<std::string, std::size_t>& artifacts() const { return artifacts_; }

 private:
  void load_partition();
  void load_roster();
  void load_prices();
  const PriceSeries* prices_or_null() const;
  void require_prices_if_needed();
  std::size_t scan(const std::function<void(const LedgerTx&)>& fn,
                   ScanOptions::DupCheck dup = ScanOptions::DupCheck::off);
  std::string out_path(const std::string& name) const;
  void register_artifact(const std::string& name, std::size_t rows);

  PipelineConfig config_;
  AddressIndex addrs_;
  std::optional<EntityPartition> partition_;
  std::optional<std::vector<MarketInfo>> roster_;
  std::optional<PriceSeries> prices_;
  bool ledger_has_rates_ = false;
  bool ledger_probed_ = false;
  std::size_t tx_count_ = 0;

  std::optional<ResilienceSeries> weekly_;
  std::optional<MigrationDataset> migration_;

  struct ClosureSummary {
    std::string market;
    Day date = 0;
    std::size_t users = 0;
    std::size_t migrants = 0;
    std::optional<int> recovery_days;
    double recovery_baseline = 0.0;
    std::optional<double> top_share;
    std::optional<double> multi_dest_fraction;
  };
  std::vector<ClosureSummary> closure_summaries_;
  std::vector<double> null_p_;

  std::map<std::string, std::size_t> artifacts_;
};

// Slug used in per-market artifact names ("AlphaBay Market" -> "alphabay-market").
std::string market_slug(const std::string& name);

inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace dmflow
