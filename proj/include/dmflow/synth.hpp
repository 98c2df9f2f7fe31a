#pragma once

#include <map>
#include <string>
#include <vector>

#include "dmflow/clustering.hpp"
#include "dmflow/common.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/markets.hpp"
#include "dmflow/prices.hpp"

namespace dmflow {

struct SynthMigrationParams {
  double migrant_fraction = 0.6;       // of a closure's eligible users
  double coordination_strength = 2.0;  // softmax beta over destination volume
  double dropout_fraction = 0.1;       // scripted permanent dropouts
  double multi_destination_fraction = 0.04;
  int delay_min_days = 1;              // days before a migrant re-engages
  int delay_max_days = 5;
  int dropout_linger_days = 5;         // dropouts wind down within this window
};

// Generator configuration. The JSON schema mirrors the field names below;
// see the repo README for the documented schema.
struct SynthConfig {
  std::uint64_t seed = 0;
  bool seed_set = false;  // the seed field is mandatory in config files

  std::vector<MarketInfo> markets;
  Day start = 0;  // generation range [start, end)
  Day end = 0;

  int users = 100;
  int exchanges = 2;
  double activity_exponent = 1.6;  // heavy-tailed user weights ~ k^-gamma
  double one_shot_fraction = 0.38;
  double multihomed_fraction = 0.02;  // users trading on two markets

  bool change_addresses = true;        // fresh change address per spend
  bool fresh_receive_addresses = false;  // rotate receive address per receipt
  bool final_consolidation = true;     // end-of-run wallet sweeps
  bool embed_usd_rate = false;

  double base_daily_volume_usd = 2000.0;  // per market at weight 1.0
  std::vector<double> market_weights;     // defaults to 1.0 each
  double mean_payment_usd = 150.0;
  double u2u_fraction = 0.0;  // user-to-user noise per market payment

  // When a market closes, surviving markets gradually absorb its volume in
  // proportion to their weights, scaled by the surviving-user share and
  // ramped linearly over this many days. 0 disables redistribution.
  int volume_recovery_days = 12;

  double price_usd = 100.0;
  double price_amplitude = 0.0;  // seasonal wobble of the daily price

  int market_payout_interval_days = 7;

  SynthMigrationParams migration;

  // Global daily volume multiplier steps (date, factor), applied to every
  // market's target from that date on. Used to script dips and recoveries.
  std::vector<std::pair<Day, double>> volume_multiplier;

  std::string to_json() const;
  static SynthConfig from_json(const std::string& text);
  static SynthConfig from_json_file(const std::string& path);
};

// Throws InvalidConfig.
void validate_config(const SynthConfig& config);

struct GroundTruth {
  struct Wallet {
    std::string id;
    TagKind role = TagKind::unnamed;  // market / exchange / unnamed (user)
    std::string tag_name;             // market or exchange name when tagged
    std::vector<std::string> addresses;
  };
  struct Migrant {
    std::string wallet;
    // Post-closure coexisting-market contacts with their first days;
    // consumers filter by their own analysis horizon.
    std::vector<std::pair<std::string, Day>> destinations;
    Day first_day = 0;
  };
  struct Closure {
    std::string market;
    Day date = 0;
    std::size_t user_count = 0;  // wallets with a pre-closure contact
    std::vector<Migrant> migrants;
    std::vector<std::string> dropouts;
    std::vector<std::string> multihomed_excluded;
  };

  std::vector<Wallet> wallets;
  std::vector<Closure> closures;
  std::map<std::string, Amount> market_received_native;
  std::map<std::string, Amount> market_sent_native;
  std::map<std::string, double> market_received_usd;
  std::map<std::string, double> market_sent_usd;
  std::size_t one_shot_users = 0;
  std::size_t transactions = 0;

  std::string to_json() const;
  static GroundTruth from_json(const std::string& text);
  static GroundTruth from_json_file(const std::string& path);
};

struct SynthData {
  Ledger ledger;
  PriceSeries prices;
  std::vector<Seed> seeds;
  std::vector<MarketInfo> roster;
  GroundTruth truth;
};

// Deterministic generation: identical (config, seed) produce byte-identical
// artifacts. Throws InvalidConfig.
SynthData generate(const SynthConfig& config);

struct GeneratedFiles {
  std::string ledger_path;
  std::string prices_path;
  std::string seeds_path;
  std::string markets_path;
  std::string ground_truth_path;
  std::size_t transactions = 0;
};

// Streams the ledger straight to disk; memory stays bounded by the wallet
// table. Writes ledger.jsonl, prices.csv, seeds.csv, markets.csv and
// ground_truth.json into out_dir.
GeneratedFiles generate_files(const SynthConfig& config, const std::string& out_dir);

// Named, ready-to-run configurations (keys include "paper-shape",
// "clean-clustering", "dropout-15", "no-coordination", "recovery-10",
// "perf-1m", "perf-500k").
const std::map<std::string, SynthConfig>& scenario_library();

}  // namespace dmflow
