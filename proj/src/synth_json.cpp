#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dmflow/errors.hpp"
#include "dmflow/synth.hpp"

namespace dmflow {

namespace {

using nlohmann::json;

json market_to_json(const MarketInfo& m) {
  json j;
  j["name"] = m.name;
  j["start_date"] = format_date(m.start);
  if (m.end) j["end_date"] = format_date(*m.end);
  j["closure_reason"] = to_string(m.reason);
  j["category"] = to_string(m.category);
  return j;
}

MarketInfo market_from_json(const json& j) {
  MarketInfo m;
  m.name = j.at("name").get<std::string>();
  m.start = parse_date(j.at("start_date").get<std::string>());
  if (j.contains("end_date") && !j["end_date"].is_null()) {
    m.end = parse_date(j["end_date"].get<std::string>());
  }
  m.reason = close_reason_from_string(j.at("closure_reason").get<std::string>());
  m.category = category_from_string(j.at("category").get<std::string>());
  return m;
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string SynthConfig::to_json() const {
  json j;
  j["seed"] = seed;
  j["start_date"] = format_date(start);
  j["end_date"] = format_date(end);
  j["markets"] = json::array();
  for (const auto& m : markets) j["markets"].push_back(market_to_json(m));
  j["users"] = users;
  j["exchanges"] = exchanges;
  j["activity_exponent"] = activity_exponent;
  j["one_shot_fraction"] = one_shot_fraction;
  j["multihomed_fraction"] = multihomed_fraction;
  j["change_addresses"] = change_addresses;
  j["fresh_receive_addresses"] = fresh_receive_addresses;
  j["final_consolidation"] = final_consolidation;
  j["embed_usd_rate"] = embed_usd_rate;
  j["base_daily_volume_usd"] = base_daily_volume_usd;
  if (!market_weights.empty()) j["market_weights"] = market_weights;
  j["mean_payment_usd"] = mean_payment_usd;
  j["u2u_fraction"] = u2u_fraction;
  j["volume_recovery_days"] = volume_recovery_days;
  j["price_usd"] = price_usd;
  j["price_amplitude"] = price_amplitude;
  j["market_payout_interval_days"] = market_payout_interval_days;
  j["migration"] = {
      {"migrant_fraction", migration.migrant_fraction},
      {"coordination_strength", migration.coordination_strength},
      {"dropout_fraction", migration.dropout_fraction},
      {"multi_destination_fraction", migration.multi_destination_fraction},
      {"delay_min_days", migration.delay_min_days},
      {"delay_max_days", migration.delay_max_days},
      {"dropout_linger_days", migration.dropout_linger_days},
  };
  if (!volume_multiplier.empty()) {
    j["volume_multiplier"] = json::array();
    for (const auto& [from, factor] : volume_multiplier) {
      j["volume_multiplier"].push_back(
          {{"from_date", format_date(from)}, {"factor", factor}});
    }
  }
  return j.dump(2) + "\n";
}

SynthConfig SynthConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw BadConfig(std::string("bad config JSON: ") + e.what());
  }
  SynthConfig c;
  try {
    if (!j.contains("seed")) throw InvalidConfig("seed is mandatory");
    c.seed = j.at("seed").get<std::uint64_t>();
    c.seed_set = true;
    c.start = parse_date(j.at("start_date").get<std::string>());
    c.end = parse_date(j.at("end_date").get<std::string>());
    for (const auto& m : j.at("markets")) c.markets.push_back(market_from_json(m));
    maybe(j, "users", c.users);
    maybe(j, "exchanges", c.exchanges);
    maybe(j, "activity_exponent", c.activity_exponent);
    maybe(j, "one_shot_fraction", c.one_shot_fraction);
    maybe(j, "multihomed_fraction", c.multihomed_fraction);
    maybe(j, "change_addresses", c.change_addresses);
    maybe(j, "fresh_receive_addresses", c.fresh_receive_addresses);
    maybe(j, "final_consolidation", c.final_consolidation);
    maybe(j, "embed_usd_rate", c.embed_usd_rate);
    maybe(j, "base_daily_volume_usd", c.base_daily_volume_usd);
    if (j.contains("market_weights")) {
      c.market_weights = j["market_weights"].get<std::vector<double>>();
    }
    maybe(j, "mean_payment_usd", c.mean_payment_usd);
    maybe(j, "u2u_fraction", c.u2u_fraction);
    maybe(j, "volume_recovery_days", c.volume_recovery_days);
    maybe(j, "price_usd", c.price_usd);
    maybe(j, "price_amplitude", c.price_amplitude);
    maybe(j, "market_payout_interval_days", c.market_payout_interval_days);
    if (j.contains("migration")) {
      const auto& m = j["migration"];
      maybe(m, "migrant_fraction", c.migration.migrant_fraction);
      maybe(m, "coordination_strength", c.migration.coordination_strength);
      maybe(m, "dropout_fraction", c.migration.dropout_fraction);
      maybe(m, "multi_destination_fraction", c.migration.multi_destination_fraction);
      maybe(m, "delay_min_days", c.migration.delay_min_days);
      maybe(m, "delay_max_days", c.migration.delay_max_days);
      maybe(m, "dropout_linger_days", c.migration.dropout_linger_days);
    }
    if (j.contains("volume_multiplier")) {
      for (const auto& step : j["volume_multiplier"]) {
        c.volume_multiplier.emplace_back(
            parse_date(step.at("from_date").get<std::string>()),
            step.at("factor").get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw BadConfig(std::string("bad config: ") + e.what());
  }
  return c;
}

SynthConfig SynthConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

std::string GroundTruth::to_json() const {
  json j;
  j["wallets"] = json::array();
  for (const auto& w : wallets) {
    json wj;
    wj["id"] = w.id;
    wj["role"] = to_string(w.role);
    wj["name"] = w.tag_name;
    wj["addresses"] = w.addresses;
    j["wallets"].push_back(std::move(wj));
  }
  j["closures"] = json::array();
  for (const auto& c : closures) {
    json cj;
    cj["market"] = c.market;
    cj["date"] = format_date(c.date);
    cj["user_count"] = c.user_count;
    cj["migrants"] = json::array();
    for (const auto& m : c.migrants) {
      json dests = json::array();
      for (const auto& [name, day] : m.destinations) {
        dests.push_back({{"market", name}, {"first_day", format_date(day)}});
      }
      cj["migrants"].push_back({{"wallet", m.wallet},
                                {"destinations", std::move(dests)},
                                {"first_day", format_date(m.first_day)}});
    }
    cj["dropouts"] = c.dropouts;
    cj["multihomed_excluded"] = c.multihomed_excluded;
    j["closures"].push_back(std::move(cj));
  }
  j["market_received_native"] = market_received_native;
  j["market_sent_native"] = market_sent_native;
  j["market_received_usd"] = market_received_usd;
  j["market_sent_usd"] = market_sent_usd;
  j["one_shot_users"] = one_shot_users;
  j["transactions"] = transactions;
  return j.dump(2) + "\n";
}

GroundTruth GroundTruth::from_json(const std::string& text) {
  json j = json::parse(text);
  GroundTruth t;
  for (const auto& wj : j.at("wallets")) {
    Wallet w;
    w.id = wj.at("id").get<std::string>();
    w.role = tag_kind_from_string(wj.at("role").get<std::string>());
    w.tag_name = wj.at("name").get<std::string>();
    w.addresses = wj.at("addresses").get<std::vector<std::string>>();
    t.wallets.push_back(std::move(w));
  }
  for (const auto& cj : j.at("closures")) {
    Closure c;
    c.market = cj.at("market").get<std::string>();
    c.date = parse_date(cj.at("date").get<std::string>());
    c.user_count = cj.at("user_count").get<std::size_t>();
    for (const auto& mj : cj.at("migrants")) {
      Migrant m;
      m.wallet = mj.at("wallet").get<std::string>();
      for (const auto& dj : mj.at("destinations")) {
        m.destinations.emplace_back(dj.at("market").get<std::string>(),
                                    parse_date(dj.at("first_day").get<std::string>()));
      }
      m.first_day = parse_date(mj.at("first_day").get<std::string>());
      c.migrants.push_back(std::move(m));
    }
    c.dropouts = cj.at("dropouts").get<std::vector<std::string>>();
    c.multihomed_excluded =
        cj.at("multihomed_excluded").get<std::vector<std::string>>();
    t.closures.push_back(std::move(c));
  }
  t.market_received_native =
      j.at("market_received_native").get<std::map<std::string, Amount>>();
  t.market_sent_native = j.at("market_sent_native").get<std::map<std::string, Amount>>();
  t.market_received_usd =
      j.at("market_received_usd").get<std::map<std::string, double>>();
  t.market_sent_usd = j.at("market_sent_usd").get<std::map<std::string, double>>();
  t.one_shot_users = j.at("one_shot_users").get<std::size_t>();
  t.transactions = j.at("transactions").get<std::size_t>();
  return t;
}

GroundTruth GroundTruth::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

}  // namespace dmflow
