#include "dmflow/synth.hpp"

namespace dmflow {

namespace {

MarketInfo synth_market(const std::string& name, const char* start, const char* end,
                        CloseReason reason) {
  MarketInfo m;
  m.name = name;
  m.start = parse_date(start);
  if (end) m.end = parse_date(end);
  m.reason = reason;
  m.category = MarketCategory::mixed;
  return m;
}

SynthConfig base_config() {
  SynthConfig c;
  c.seed = 8651;
  c.seed_set = true;
  return c;
}

// Clean heuristics only: fresh change addresses, reused receive addresses,
// no address sharing. Clustering must recover wallets exactly.
SynthConfig clean_clustering() {
  SynthConfig c = base_config();
  c.start = parse_date("2020-01-06");
  c.end = parse_date("2021-12-27");
  c.markets = {
      synth_market("Aldera Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Basilisk Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Cobalt Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Dunesea Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Ember Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Fenrir Market", "2020-02-03", "2020-11-02", CloseReason::scam),
      synth_market("Gorgon Market", "2020-01-20", "2021-03-01", CloseReason::raided),
      synth_market("Hollow Market", "2020-03-02", "2021-08-02", CloseReason::scam),
  };
  c.users = 12000;
  c.exchanges = 3;
  c.one_shot_fraction = 0.38;
  c.multihomed_fraction = 0.02;
  c.change_addresses = true;
  c.fresh_receive_addresses = false;
  c.final_consolidation = true;
  c.base_daily_volume_usd = 6000.0;
  c.mean_payment_usd = 150.0;
  c.u2u_fraction = 0.05;
  return c;
}

// The 31-market reference roster with its historical lifetimes.
SynthConfig paper_shape() {
  SynthConfig c = base_config();
  c.markets = reference_roster();
  c.start = parse_date("2011-06-13");
  c.end = parse_date("2019-07-22");
  // Markets differ widely in size; a deterministic spread keeps volume
  // rankings non-degenerate.
  for (std::size_t i = 0; i < c.markets.size(); ++i) {
    c.market_weights.push_back(0.3 + 1.7 * static_cast<double>((i * 13) % 31) / 30.0);
  }
  c.users = 2500;
  c.exchanges = 3;
  c.one_shot_fraction = 0.38;
  c.multihomed_fraction = 0.03;
  c.base_daily_volume_usd = 1200.0;
  c.mean_payment_usd = 160.0;
  c.migration.migrant_fraction = 0.65;
  c.migration.coordination_strength = 6.0;
  c.migration.dropout_fraction = 0.15;
  return c;
}

std::vector<MarketInfo> staggered_markets() {
  return {
      synth_market("Arbor Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Brine Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Cinder Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Drift Market", "2020-01-06", "2020-08-03", CloseReason::raided),
      synth_market("Eddy Market", "2020-01-06", "2020-11-02", CloseReason::scam),
      synth_market("Flint Market", "2020-01-13", "2021-02-01", CloseReason::scam),
      synth_market("Grove Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Haven Market", "2020-02-03", "2021-04-05", CloseReason::raided),
  };
}

// 15% of each closure's users permanently drop out; everyone else migrates.
SynthConfig dropout_15() {
  SynthConfig c = base_config();
  c.start = parse_date("2020-01-06");
  c.end = parse_date("2021-06-28");
  c.markets = staggered_markets();
  c.users = 3000;
  c.exchanges = 2;
  for (std::size_t i = 0; i < c.markets.size(); ++i) {
    c.market_weights.push_back(1.0 - 0.05 * static_cast<double>(i));
  }
  // Near-homogeneous, highly active users: the returning-user series then
  // tracks the scripted dropout share instead of composition effects.
  c.activity_exponent = 3.0;
  c.one_shot_fraction = 0.30;
  c.multihomed_fraction = 0.0;
  c.base_daily_volume_usd = 16000.0;
  c.mean_payment_usd = 100.0;
  c.migration.migrant_fraction = 1.0;
  c.migration.dropout_fraction = 0.15;
  // Coordinated migration onto the long-lived top market keeps later
  // closures' populations clean of twice-displaced users.
  c.migration.coordination_strength = 6.0;
  c.migration.delay_min_days = 1;
  c.migration.delay_max_days = 1;
  c.migration.dropout_linger_days = 5;
  return c;
}

// Uniform destination choice; rank frequencies follow the null model.
SynthConfig no_coordination() {
  SynthConfig c = base_config();
  c.start = parse_date("2020-01-06");
  c.end = parse_date("2021-12-27");
  c.markets = {
      synth_market("Aldera Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Basilisk Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Cobalt Market", "2020-01-06", "2020-06-01", CloseReason::scam),
      synth_market("Dunesea Market", "2020-01-06", "2020-08-03", CloseReason::raided),
      synth_market("Ember Market", "2020-01-06", "2020-10-05", CloseReason::scam),
      synth_market("Fenrir Market", "2020-01-06", "2020-12-07", CloseReason::scam),
      synth_market("Gorgon Market", "2020-01-06", "2021-02-01", CloseReason::raided),
      synth_market("Hollow Market", "2020-01-06", "2021-04-05", CloseReason::scam),
      synth_market("Icefall Market", "2020-01-06", "2021-06-07", CloseReason::raided),
      synth_market("Junction Market", "2020-01-06", "2021-08-02", CloseReason::scam),
  };
  c.users = 2400;
  c.exchanges = 2;
  c.multihomed_fraction = 0.0;
  for (std::size_t i = 0; i < c.markets.size(); ++i) {
    c.market_weights.push_back(1.0 - 0.06 * static_cast<double>(i));
  }
  c.base_daily_volume_usd = 2500.0;
  c.mean_payment_usd = 125.0;
  c.migration.migrant_fraction = 0.8;
  c.migration.coordination_strength = 0.0;
  c.migration.dropout_fraction = 0.05;
  return c;
}

// Volume scripted to dip to 30% for ten days after the closure, then
// overshoot; the daily-interpolated weekly series regains its pre-closure
// baseline exactly 10 days out.
SynthConfig recovery_10() {
  SynthConfig c = base_config();
  c.start = parse_date("2020-01-06");  // Monday; closure is Monday-aligned
  c.end = parse_date("2020-11-30");
  c.markets = {
      synth_market("Aldera Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Basilisk Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Cobalt Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Dunesea Market", "2020-01-06", "2020-06-01", CloseReason::scam),
  };
  c.users = 1500;
  c.exchanges = 2;
  c.base_daily_volume_usd = 3000.0;
  c.mean_payment_usd = 150.0;
  c.migration.migrant_fraction = 0.8;
  c.migration.coordination_strength = 3.0;
  c.migration.dropout_fraction = 0.1;
  // Total pre-closure volume is 4 markets x base; the three survivors carry
  // 0.3x of that for days 0..9 and 1.6x afterwards. The scripted multiplier
  // is the whole story, so automatic redistribution is off.
  c.volume_recovery_days = 0;
  c.volume_multiplier = {
      {parse_date("2020-06-01"), 0.3 * 4.0 / 3.0},
      {parse_date("2020-06-11"), 1.6 * 4.0 / 3.0},
  };
  return c;
}

SynthConfig perf_base() {
  SynthConfig c = base_config();
  c.start = parse_date("2020-01-06");
  c.end = parse_date("2021-12-27");
  c.markets = {
      synth_market("Aldera Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Basilisk Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Cobalt Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Dunesea Market", "2020-01-06", nullptr, CloseReason::active),
      synth_market("Ember Market", "2020-01-06", "2021-03-01", CloseReason::raided),
      synth_market("Fenrir Market", "2020-01-06", "2021-08-02", CloseReason::scam),
  };
  c.users = 25000;
  c.exchanges = 4;
  // Single-address wallets: the address count tracks the wallet count
  // instead of the spend count.
  c.change_addresses = false;
  c.final_consolidation = false;
  c.base_daily_volume_usd = 36000.0;
  c.migration.migrant_fraction = 0.7;
  c.migration.dropout_fraction = 0.1;
  return c;
}

SynthConfig perf_1m() {
  SynthConfig c = perf_base();
  c.mean_payment_usd = 150.0;
  return c;
}

// Same wallets and addresses, roughly half the transactions.
SynthConfig perf_500k() {
  SynthConfig c = perf_base();
  c.mean_payment_usd = 300.0;
  return c;
}

}  // namespace

const std::map<std::string, SynthConfig>& scenario_library() {
  static const std::map<std::string, SynthConfig> lib = [] {
    std::map<std::string, SynthConfig> m;
    m["clean-clustering"] = clean_clustering();
    m["paper-shape"] = paper_shape();
    m["dropout-15"] = dropout_15();
    m["no-coordination"] = no_coordination();
    m["recovery-10"] = recovery_10();
    m["perf-1m"] = perf_1m();
    m["perf-500k"] = perf_500k();
    return m;
  }();
  return lib;
}

}  // namespace dmflow
