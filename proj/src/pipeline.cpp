#include "dmflow/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dmflow/csv.hpp"
#include "dmflow/ego_network.hpp"
#include "dmflow/errors.hpp"

namespace dmflow {

namespace {

using nlohmann::json;

namespace fs = std::filesystem;

std::string opt_num(double v) {
  return std::isnan(v) ? std::string{} : format_double(v);
}

// Counts data rows so summary.json can declare them.
class CsvArtifact {
 public:
  CsvArtifact(const std::string& path, const std::string& header) : out_(path) {
    if (!out_) throw Error("cannot write " + path);
    out_ << header << '\n';
  }

  void row(const std::vector<std::string>& fields) {
    csv::write_row(out_, fields);
    ++rows_;
  }

  std::size_t rows() const { return rows_; }

 private:
  std::ofstream out_;
  std::size_t rows_ = 0;
};

}  // namespace

std::string market_slug(const std::string& name) {
  std::string slug;
  bool dash = false;
  for (char c : name) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      slug += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      dash = false;
    } else if (!dash && !slug.empty()) {
      slug += '-';
      dash = true;
    }
  }
  while (!slug.empty() && slug.back() == '-') slug.pop_back();
  return slug;
}

std::string PipelineConfig::to_json() const {
  json j;
  j["ledger"] = ledger_path;
  j["prices"] = prices_path;
  j["seeds"] = seeds_path;
  j["markets"] = markets_path;
  j["out_dir"] = out_dir;
  j["horizon_days"] = horizon_days;
  j["flows_horizon_days"] = flows_horizon_days;
  j["share_window_days"] = share_window_days;
  j["series_span_days"] = series_span_days;
  j["exclude_markets"] = exclude_markets;
  if (week_anchor) j["week_anchor"] = format_date(*week_anchor);
  return j.dump(2) + "\n";
}

PipelineConfig PipelineConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw BadConfig(std::string("bad pipeline config: ") + e.what());
  }
  PipelineConfig c;
  auto get = [&](const char* key, auto& out) {
    if (j.contains(key)) out = j.at(key).get<std::decay_t<decltype(out)>>();
  };
  get("ledger", c.ledger_path);
  get("prices", c.prices_path);
  get("seeds", c.seeds_path);
  get("markets", c.markets_path);
  get("out_dir", c.out_dir);
  get("horizon_days", c.horizon_days);
  get("flows_horizon_days", c.flows_horizon_days);
  get("share_window_days", c.share_window_days);
  get("series_span_days", c.series_span_days);
  get("exclude_markets", c.exclude_markets);
  if (j.contains("week_anchor")) {
    c.week_anchor = parse_date(j.at("week_anchor").get<std::string>());
  }
  return c;
}

PipelineConfig PipelineConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void PipelineConfig::validate() const {
  if (ledger_path.empty()) throw BadConfig("ledger path required");
  if (markets_path.empty()) throw BadConfig("markets roster path required");
  if (out_dir.empty()) throw BadConfig("output directory required");
  if (horizon_days <= 0 || flows_horizon_days <= 0 || share_window_days <= 0 ||
      series_span_days <= 0) {
    throw BadConfig("analysis windows must be positive");
  }
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {
  config_.validate();
  fs::create_directories(config_.out_dir);
}

std::string Pipeline::out_path(const std::string& name) const {
  return (fs::path(config_.out_dir) / name).string();
}

void Pipeline::register_artifact(const std::string& name, std::size_t rows) {
  artifacts_[name] = rows;
}

std::size_t Pipeline::scan(const std::function<void(const LedgerTx&)>& fn,
                           ScanOptions::DupCheck dup) {
  ScanOptions opts;
  opts.dup_check = dup;
  opts.require_sorted = true;
  std::vector<std::string> flagged;
  if (dup == ScanOptions::DupCheck::bloom) opts.flagged = &flagged;
  std::size_t n = scan_jsonl_file(config_.ledger_path, addrs_, fn, opts);
  if (!flagged.empty()) verify_flagged_duplicates(config_.ledger_path, flagged);
  return n;
}

void Pipeline::load_roster() {
  if (!roster_) roster_ = roster_from_csv_file(config_.markets_path);
}

void Pipeline::load_prices() {
  if (!prices_ && !config_.prices_path.empty()) {
    prices_ = PriceSeries::from_csv_file(config_.prices_path);
  }
}

const PriceSeries* Pipeline::prices_or_null() const {
  return prices_ ? &*prices_ : nullptr;
}

void Pipeline::require_prices_if_needed() {
  load_prices();
  if (prices_) return;
  if (!ledger_probed_) {
    std::ifstream in(config_.ledger_path);
    if (!in) throw MissingInput(config_.ledger_path);
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::istringstream one(line);
      AddressIndex scratch;
      ScanOptions opts;
      opts.dup_check = ScanOptions::DupCheck::off;
      scan_jsonl(one, scratch,
                 [&](const LedgerTx& tx) { ledger_has_rates_ = tx.usd_rate.has_value(); },
                 opts);
      break;
    }
    ledger_probed_ = true;
  }
  if (!ledger_has_rates_) {
    throw MissingInput(config_.prices_path.empty()
                           ? "--prices <prices.csv> (ledger records lack usd_rate)"
                           : config_.prices_path);
  }
}

void Pipeline::run_cluster() {
  PartitionBuilder builder;
  tx_count_ = scan([&](const LedgerTx& tx) { builder.observe_cospend(tx); },
                   ScanOptions::DupCheck::bloom);
  if (!config_.seeds_path.empty()) {
    builder.apply_seeds(seeds_from_csv_file(config_.seeds_path), addrs_);
  }
  ChangeLinkReport report;
  scan([&](const LedgerTx& tx) { builder.observe_change(tx, &report); });
  partition_ = builder.snapshot();

  std::ofstream out(out_path("partition.csv"));
  partition_->to_csv(out, addrs_);
  register_artifact("partition.csv", partition_->address_count());

  CsvArtifact conflicts(out_path("cluster_conflicts.csv"),
                        "tx_id,change_address,input_tag,change_tag");
  for (const auto& c : report.conflicts) {
    conflicts.row({c.tx_id, std::string(addrs_.name(c.change_address)),
                   to_string(c.input_tag.kind) + ":" + c.input_tag.name,
                   to_string(c.change_tag.kind) + ":" + c.change_tag.name});
  }
  register_artifact("cluster_conflicts.csv", conflicts.rows());
}

void Pipeline::load_partition() {
  if (partition_) return;
  std::string path = out_path("partition.csv");
  if (!fs::exists(path)) {
    throw MissingInput(path + " (run the cluster stage first)");
  }
  partition_ = EntityPartition::from_csv_file(path, addrs_);
}

void Pipeline::run_ego() {
  load_partition();
  load_roster();
  require_prices_if_needed();

  // Pass 1: exact first-market-contact timestamps.
  FirstMarketContact contacts(*partition_);
  scan([&](const LedgerTx& tx) { contacts.observe(tx, *partition_); });

  struct MarketFiles {
    EntityId entity;
    std::string slug;
    std::unique_ptr<CsvArtifact> edges;
    std::vector<std::pair<EntityId, NodeRole>> nodes;  // filled at the end
    std::vector<bool> present;
  };
  std::vector<MarketFiles> files;
  for (const auto& m : *roster_) {
    auto entity = partition_->entity_named(TagKind::market, m.name);
    if (!entity) continue;  // market never seeded in this ledger
    MarketFiles f;
    f.entity = *entity;
    f.slug = market_slug(m.name);
    f.edges = std::make_unique<CsvArtifact>(
        out_path("ego_" + f.slug + "_edges.csv"), "src_entity,dst_entity,timestamp,usd");
    f.present.assign(partition_->entity_count(), false);
    f.present[*entity] = true;
    files.push_back(std::move(f));
  }

  // Neighbor sets: entity -> bitmask over the (<= 64) roster markets.
  std::vector<std::uint64_t> neighbor_mask(partition_->entity_count(), 0);
  scan([&](const LedgerTx& tx) {
    for_each_transfer(tx, *partition_, prices_or_null(), [&](const EntityEdge& e) {
      for (std::size_t i = 0; i < files.size(); ++i) {
        EntityId m = files[i].entity;
        if (e.src == m && e.dst != m) neighbor_mask[e.dst] |= 1ULL << i;
        if (e.dst == m && e.src != m) neighbor_mask[e.src] |= 1ULL << i;
      }
    });
  });

  // Pass 2: stream qualifying edges straight to the per-market files.
  auto is_exchange = [&](EntityId e) {
    return partition_->has_kind(e, TagKind::exchange);
  };
  scan([&](const LedgerTx& tx) {
    for_each_transfer(tx, *partition_, prices_or_null(), [&](const EntityEdge& e) {
      if (is_exchange(e.src) || is_exchange(e.dst)) return;
      for (std::size_t i = 0; i < files.size(); ++i) {
        EntityId m = files[i].entity;
        bool keep = e.src == m || e.dst == m;
        if (!keep && (neighbor_mask[e.src] >> i) & 1) {
          auto f = contacts.first(e.src);
          keep = f && e.timestamp >= *f;
        }
        if (!keep && (neighbor_mask[e.dst] >> i) & 1) {
          auto f = contacts.first(e.dst);
          keep = f && e.timestamp >= *f;
        }
        if (!keep) continue;
        files[i].edges->row({std::to_string(e.src), std::to_string(e.dst),
                             std::to_string(e.timestamp), format_double(e.usd)});
        files[i].present[e.src] = true;
        files[i].present[e.dst] = true;
      }
    });
  });

  for (std::size_t i = 0; i < files.size(); ++i) {
    auto& f = files[i];
    CsvArtifact nodes(out_path("ego_" + f.slug + "_nodes.csv"),
                      "entity_id,role,tag_kind,name");
    for (EntityId e = 0; e < partition_->entity_count(); ++e) {
      if (!f.present[e]) continue;
      NodeRole role = e == f.entity ? NodeRole::market
                      : ((neighbor_mask[e] >> i) & 1) ? NodeRole::neighbor
                                                      : NodeRole::other;
      const Tag& tag = partition_->tag(e);
      nodes.row({std::to_string(e), to_string(role), to_string(tag.kind), tag.name});
    }
    register_artifact("ego_" + f.slug + "_edges.csv", f.edges->rows());
    register_artifact("ego_" + f.slug + "_nodes.csv", nodes.rows());
  }
}

void Pipeline::run_metrics() {
  load_partition();
  load_roster();
  require_prices_if_needed();

  FirstMarketContact contacts(*partition_);
  tx_count_ = scan([&](const LedgerTx& tx) { contacts.observe(tx, *partition_); });

  WeeklyResilienceBuilder builder(*partition_, prices_or_null(), contacts, true,
                                  config_.week_anchor);
  scan([&](const LedgerTx& tx) { builder.observe(tx); });
  weekly_ = builder.finish(*roster_);

  CsvArtifact fig3(out_path("fig3_weekly.csv"),
                   "week_start,active_markets,volume_markets_usd,volume_ego_usd,"
                   "unique_users");
  const auto& w = *weekly_;
  for (std::size_t i = 0; i < w.volume_markets_usd.size(); ++i) {
    fig3.row({format_date(w.volume_markets_usd.week_start(i)),
              format_double(i < w.active_markets.size() ? w.active_markets.values[i] : 0),
              format_double(w.volume_markets_usd.values[i]),
              format_double(w.volume_ego_usd.values[i]),
              format_double(w.unique_users.values[i])});
  }
  register_artifact("fig3_weekly.csv", fig3.rows());

  auto m = macd(w.volume_markets_usd.values);
  CsvArtifact macd_csv(out_path("macd.csv"), "date,macd,signal,histogram");
  for (std::size_t i = 0; i < m.macd_line.size(); ++i) {
    macd_csv.row({format_date(w.volume_markets_usd.week_start(i)),
                  format_double(m.macd_line[i]), format_double(m.signal_line[i]),
                  format_double(m.histogram[i])});
  }
  register_artifact("macd.csv", macd_csv.rows());
}

void Pipeline::run_migrate() {
  load_partition();
  load_roster();
  require_prices_if_needed();

  MigrationOptions options;
  options.horizon_days = config_.horizon_days;
  options.flows_horizon_days = config_.flows_horizon_days;
  options.share_window_days = config_.share_window_days;
  options.series_span_days = config_.series_span_days;

  MigrationScan scanner(*roster_, *partition_, prices_or_null(), options);
  scan([&](const LedgerTx& tx) { scanner.observe(tx); });
  migration_ = std::move(scanner).finish();
  const auto& ds = *migration_;

  json report;
  report["horizon_days"] = options.horizon_days;
  report["flows_horizon_days"] = options.flows_horizon_days;
  report["closures"] = json::array();

  CsvArtifact flows_csv(out_path("fig4_flows.csv"),
                        "closed_market,destination,migrants");
  for (const auto& f : ds.migration_flows(options.flows_horizon_days)) {
    flows_csv.row({f.closed_market, f.destination, std::to_string(f.migrants)});
  }
  register_artifact("fig4_flows.csv", flows_csv.rows());

  CsvArtifact fig5(out_path("fig5_activity.csv"),
                   "closed_market,group,volume_definition,n,mean,median,q1,q3,ks_d,"
                   "ks_p");
  CsvArtifact rank_table(out_path("fig6_rank_table.csv"),
                         "closed_market,criterion,exclusions,chosen_rank,"
                         "top_destination,candidates");
  std::vector<ReturningSeries> returning;
  std::vector<std::string> returning_markets;
  std::vector<ShareSeries> shares;

  struct RankVariant {
    RankCriterion criterion;
    bool exclude;
    const char* label;
  };
  const RankVariant variants[] = {
      {RankCriterion::common_users, false, "none"},
      {RankCriterion::common_users, true, "configured"},
      {RankCriterion::total_volume, false, "none"},
      {RankCriterion::total_volume, true, "configured"},
  };
  std::map<std::string, std::map<int, int>> rank_counts;  // variant -> rank -> n

  closure_summaries_.clear();
  for (std::size_t ci = 0; ci < ds.closures().size(); ++ci) {
    const auto& closure = ds.closures()[ci];
    ClosureSummary summary;
    summary.market = closure.market;
    summary.date = closure.closure_date;
    summary.users = ds.user_count(ci);

    json cj;
    cj["market"] = closure.market;
    cj["date"] = format_date(closure.closure_date);
    cj["coexisting"] = closure.coexisting;
    cj["users"] = summary.users;

    std::vector<MigrantRecord> migrants;
    if (!closure.coexisting.empty()) {
      migrants = ds.identify_migrants(ci, options.horizon_days);
    }
    summary.migrants = migrants.size();
    cj["migrants"] = migrants.size();
    json dest_counts = json::object();
    {
      std::map<std::string, std::size_t> counts;
      for (const auto& m : migrants) {
        for (auto d : m.destinations) ++counts[ds.roster()[d].name];
      }
      for (const auto& [k, v] : counts) dest_counts[k] = v;
    }
    cj["destination_counts"] = dest_counts;
    json migrant_ids = json::array();
    for (const auto& m : migrants) migrant_ids.push_back(m.user);
    cj["migrant_entities"] = migrant_ids;

    if (!migrants.empty()) {
      auto abs_stats = ds.absorption_stats(migrants);
      summary.top_share = abs_stats.top_share;
      summary.multi_dest_fraction = abs_stats.multi_dest_fraction;
      cj["absorption"] = {{"top_share", abs_stats.top_share},
                          {"multi_destination_fraction", abs_stats.multi_dest_fraction},
                          {"modal_destination", abs_stats.modal_destination}};
      try {
        auto cmp = ds.activity_comparison(ci, migrants);
        auto emit_group = [&](const char* group, const char* def, const GroupStats& g,
                              const KsResult& ks) {
          fig5.row({closure.market, group, def, std::to_string(g.n),
                    format_double(g.mean), format_double(g.median),
                    format_double(g.q1), format_double(g.q3),
                    format_double(ks.d_statistic), format_double(ks.p_value)});
        };
        emit_group("migrants", "total", cmp.migrants_total, cmp.ks_total);
        emit_group("non_migrants", "total", cmp.non_migrants_total, cmp.ks_total);
        emit_group("migrants", "home_market", cmp.migrants_home, cmp.ks_home);
        emit_group("non_migrants", "home_market", cmp.non_migrants_home, cmp.ks_home);
        cj["activity"] = {
            {"migrants_total_median", cmp.migrants_total.median},
            {"non_migrants_total_median", cmp.non_migrants_total.median},
            {"migrants_home_median", cmp.migrants_home.median},
            {"non_migrants_home_median", cmp.non_migrants_home.median},
            {"ks_total", {{"d", cmp.ks_total.d_statistic}, {"p", cmp.ks_total.p_value}}},
            {"ks_home", {{"d", cmp.ks_home.d_statistic}, {"p", cmp.ks_home.p_value}}},
        };
      } catch (const EmptyGroup&) {
        cj["activity"] = nullptr;
      }

      json ranks = json::array();
      for (const auto& variant : variants) {
        std::vector<std::string> exclusions =
            variant.exclude ? config_.exclude_markets : std::vector<std::string>{};
        try {
          auto outcome = ds.destination_ranking(ci, variant.criterion, exclusions,
                                                migrants);
          std::string rank_str =
              outcome.chosen_rank ? std::to_string(*outcome.chosen_rank) : "";
          rank_table.row({closure.market, to_string(variant.criterion), variant.label,
                          rank_str, outcome.top_destination,
                          std::to_string(outcome.ranking.size())});
          if (outcome.chosen_rank) {
            std::string key = to_string(variant.criterion) + "/" + variant.label;
            ++rank_counts[key][*outcome.chosen_rank];
            ranks.push_back({{"criterion", to_string(variant.criterion)},
                             {"exclusions", variant.label},
                             {"chosen_rank", *outcome.chosen_rank},
                             {"top_destination", outcome.top_destination}});
          }
        } catch (const NoCoexistingMarkets&) {
          rank_table.row({closure.market, to_string(variant.criterion), variant.label,
                          "", "", "0"});
        }
      }
      cj["rankings"] = ranks;

      shares.push_back(ds.market_share_window(ci, migrants));
    }

    try {
      returning.push_back(ds.returning_fraction(ci));
      returning_markets.push_back(closure.market);
    } catch (const InsufficientHistory&) {
      // closure without usable pre-closure history
    }

    report["closures"].push_back(std::move(cj));
    closure_summaries_.push_back(std::move(summary));
  }
  register_artifact("fig5_activity.csv", fig5.rows());
  register_artifact("fig6_rank_table.csv", rank_table.rows());

  // Null model over closures with at least one coexisting market.
  std::vector<ClosureEvent> with_coex;
  for (const auto& c : ds.closures()) {
    if (!c.coexisting.empty()) with_coex.push_back(c);
  }
  null_p_.clear();
  if (!with_coex.empty()) null_p_ = null_model(with_coex);
  json null_json;
  null_json["m"] = with_coex.size();
  null_json["coexisting_counts"] = json::array();
  for (const auto& c : with_coex) {
    null_json["coexisting_counts"].push_back(c.coexisting.size());
  }
  null_json["p"] = null_p_;
  report["null_model"] = null_json;

  CsvArtifact rank_freq(out_path("fig6_rank_freq.csv"),
                        "criterion,exclusions,rank,frequency,null_p");
  for (const auto& [key, counts] : rank_counts) {
    std::size_t total = 0;
    for (const auto& [rank, n] : counts) total += n;
    auto slash = key.find('/');
    for (const auto& [rank, n] : counts) {
      double null_p = rank >= 1 && static_cast<std::size_t>(rank) <= null_p_.size()
                          ? null_p_[static_cast<std::size_t>(rank - 1)]
                          : 0.0;
      rank_freq.row({key.substr(0, slash), key.substr(slash + 1),
                     std::to_string(rank),
                     format_double(static_cast<double>(n) / static_cast<double>(total)),
                     format_double(null_p)});
    }
  }
  register_artifact("fig6_rank_freq.csv", rank_freq.rows());

  // Returning-user series: per-closure columns plus the cross-closure median.
  {
    std::string header = "day_offset,median";
    for (const auto& name : returning_markets) header += "," + market_slug(name);
    CsvArtifact ret(out_path("returning_users.csv"), header);
    auto med = MigrationDataset::median_across(returning);
    int span = config_.series_span_days;
    for (int off = -span; off <= span; ++off) {
      std::vector<std::string> row;
      row.push_back(std::to_string(off));
      auto idx = static_cast<std::size_t>(off + span);
      row.push_back(idx < med.size() ? opt_num(med[idx]) : std::string{});
      for (const auto& s : returning) {
        row.push_back(idx < s.normalized.size() ? opt_num(s.normalized[idx])
                                                : std::string{});
      }
      ret.row(row);
    }
    register_artifact("returning_users.csv", ret.rows());
    json med_json = json::array();
    for (double v : med) med_json.push_back(std::isnan(v) ? json{} : json(v));
    report["returning_median"] = med_json;
  }

  // Share series: cross-closure median with interquartile band.
  {
    auto agg = MigrationDataset::aggregate_shares(shares);
    CsvArtifact fig6(out_path("fig6_share_series.csv"),
                     "day_offset,closed_median,closed_q1,closed_q3,dest1_median,"
                     "dest1_q1,dest1_q3,dest2_median,dest2_q1,dest2_q3");
    int span = config_.series_span_days;
    for (int off = -span; off <= span; ++off) {
      auto i = static_cast<std::size_t>(off + span);
      auto cell = [&](const std::vector<double>& v) {
        return i < v.size() ? opt_num(v[i]) : std::string{};
      };
      fig6.row({std::to_string(off), cell(agg.closed.median), cell(agg.closed.q1),
                cell(agg.closed.q3), cell(agg.dest1.median), cell(agg.dest1.q1),
                cell(agg.dest1.q3), cell(agg.dest2.median), cell(agg.dest2.q1),
                cell(agg.dest2.q3)});
    }
    register_artifact("fig6_share_series.csv", fig6.rows());
  }

  std::ofstream out(out_path("migration_report.json"));
  out << report.dump(2) << "\n";
  register_artifact("migration_report.json", 1);
}

void Pipeline::run_report() {
  if (!weekly_) run_metrics();
  if (!migration_) run_migrate();
  load_roster();

  // Recovery estimates against the weekly market volume.
  json recovery = json::array();
  for (auto& summary : closure_summaries_) {
    json rj;
    rj["market"] = summary.market;
    rj["date"] = format_date(summary.date);
    try {
      auto r = recovery_time(weekly_->volume_markets_usd, summary.date);
      summary.recovery_baseline = r.baseline;
      rj["baseline_usd"] = r.baseline;
      if (r.recovered) {
        summary.recovery_days = r.days;
        rj["days"] = r.days;
      } else {
        rj["days"] = nullptr;
      }
    } catch (const OutOfRange&) {
      rj["days"] = nullptr;
      rj["baseline_usd"] = nullptr;
    }
    recovery.push_back(std::move(rj));
  }

  json j;
  j["tool_version"] = kToolVersion;
  // Hash the analysis-relevant configuration only; directory names must not
  // break run-to-run byte identity.
  json hashed;
  hashed["ledger"] = fs::path(config_.ledger_path).filename().string();
  hashed["prices"] = fs::path(config_.prices_path).filename().string();
  hashed["seeds"] = fs::path(config_.seeds_path).filename().string();
  hashed["markets"] = fs::path(config_.markets_path).filename().string();
  hashed["horizon_days"] = config_.horizon_days;
  hashed["flows_horizon_days"] = config_.flows_horizon_days;
  hashed["share_window_days"] = config_.share_window_days;
  hashed["series_span_days"] = config_.series_span_days;
  hashed["exclude_markets"] = config_.exclude_markets;
  if (config_.week_anchor) hashed["week_anchor"] = format_date(*config_.week_anchor);
  std::uint64_t hash = fnv1a64(hashed.dump());
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(hash));
  j["config_hash"] = hex;
  j["totals"] = {{"transactions", tx_count_},
                 {"addresses", addrs_.size()},
                 {"entities", partition_ ? partition_->entity_count() : 0},
                 {"markets", roster_->size()}};
  j["recovery"] = recovery;
  json closures = json::array();
  for (const auto& s : closure_summaries_) {
    json cj = {{"market", s.market},
               {"date", format_date(s.date)},
               {"users", s.users},
               {"migrants", s.migrants}};
    if (s.top_share) cj["top_share"] = *s.top_share;
    if (s.multi_dest_fraction) cj["multi_destination_fraction"] = *s.multi_dest_fraction;
    closures.push_back(std::move(cj));
  }
  j["closures"] = closures;
  j["null_model_p"] = null_p_;

  // Artifact row counts, written last so the registry is complete.
  json arts = json::object();
  for (const auto& [name, rows] : artifacts_) arts[name] = rows;
  j["artifacts"] = arts;

  std::ofstream out(out_path("summary.json"));
  out << j.dump(2) << "\n";
}

void Pipeline::run_all() {
  run_cluster();
  run_ego();
  run_metrics();
  run_migrate();
  run_report();
}

}  // namespace dmflow
