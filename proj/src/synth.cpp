#include "dmflow/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "dmflow/errors.hpp"
#include "dmflow/migration.hpp"
#include "dmflow/rng.hpp"

namespace dmflow {

namespace {

using nlohmann::json;

constexpr Amount kFee = 1000;
constexpr Amount kDust = 2000;
constexpr std::uint32_t kNone32 = ~std::uint32_t{0};

// Stream tags for derived RNG streams.
enum RngPurpose : std::uint64_t {
  kRngUsers = 1,
  kRngAmounts,
  kRngPayers,
  kRngDeposit,
  kRngClosure,
  kRngVendors,
  kRngU2u,
};

std::string format_id(const char* prefix, std::uint32_t n, int width) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "%s%0*u", prefix, width, n);
  return buf;
}

struct Wallet {
  std::string id;
  TagKind role = TagKind::unnamed;
  std::string tag_name;
  int market_index = -1;                  // for market wallets
  int home = -1;                          // user's first market pool
  std::vector<std::uint32_t> addresses;   // all addresses ever owned
  std::vector<std::uint32_t> spendable;   // positive balance, creation order
  std::uint32_t receive = kNone32;
  std::uint64_t markets_touched = 0;
  double weight = 1.0;
  double daily_rate = 0.0;  // per-day activity probability, stationary
  bool one_shot = false;
  Day active_from = std::numeric_limits<Day>::min();
  Day active_until = std::numeric_limits<Day>::max();

  bool live_on(Day d) const { return d >= active_from && d <= active_until; }
};

struct Pool {
  std::vector<std::uint32_t> members;
  double weight_sum = 0.0;

  void add(std::uint32_t wallet, double weight) {
    members.push_back(wallet);
    weight_sum += weight;
  }
};

struct ForcedPayment {
  std::uint16_t market = 0;
  std::uint32_t user = 0;
};

class Generator {
 public:
  Generator(const SynthConfig& config,
            const std::function<void(const Transaction&)>& sink)
      : cfg_(config), sink_(sink), root_(config.seed) {}

  GroundTruth run();

 private:
  // -- address/balance bookkeeping -----------------------------------------
  std::uint32_t new_address(std::uint32_t wallet) {
    auto id = static_cast<std::uint32_t>(balance_.size());
    balance_.push_back(0);
    wallets_[wallet].addresses.push_back(id);
    return id;
  }

  std::string addr_name(std::uint32_t a) const { return format_id("a", a, 8); }

  std::uint32_t receive_address(std::uint32_t w) {
    Wallet& wallet = wallets_[w];
    if (!cfg_.change_addresses) {
      // Single-address wallets.
      if (wallet.receive == kNone32) wallet.receive = new_address(w);
      return wallet.receive;
    }
    if (cfg_.fresh_receive_addresses || wallet.receive == kNone32) {
      wallet.receive = new_address(w);
    }
    return wallet.receive;
  }

  void credit(std::uint32_t w, std::uint32_t addr, Amount amount) {
    if (balance_[addr] == 0) wallets_[w].spendable.push_back(addr);
    balance_[addr] += amount;
  }

  Amount wallet_balance(const Wallet& w) const {
    Amount total = 0;
    for (auto a : w.spendable) total += balance_[a];
    return total;
  }

  // Full-balance input selection. Consolidating wallets (markets, exchanges)
  // always spend everything they hold.
  std::vector<std::uint32_t> select_inputs(std::uint32_t w, Amount need,
                                           bool consolidate) {
    Wallet& wallet = wallets_[w];
    std::vector<std::uint32_t> chosen;
    Amount got = 0;
    for (auto a : wallet.spendable) {
      chosen.push_back(a);
      got += balance_[a];
      if (!consolidate && got >= need) break;
    }
    if (got < need) return {};  // caller must fund first
    return chosen;
  }

  // -- transaction emission -------------------------------------------------
  Timestamp next_ts(Day d) {
    if (d != seq_day_) {
      seq_day_ = d;
      seq_in_day_ = 0;
    }
    Timestamp ts = day_start(d) + std::min<Timestamp>(seq_in_day_, kSecondsPerDay - 1);
    ++seq_in_day_;
    return ts;
  }

  void emit(Transaction& tx) {
    tx.tx_id = format_id("t", tx_counter_++, 8);
    if (cfg_.embed_usd_rate) tx.usd_rate = rate_of_day_[day_of(tx.timestamp) - price_first_];
    sink_(tx);
    ++truth_.transactions;
  }

  void emit_coinbase(std::uint32_t exchange, Amount amount, Day d) {
    std::uint32_t addr = receive_address(exchange);
    Transaction tx;
    tx.timestamp = next_ts(d);
    tx.outputs.push_back({addr_name(addr), amount});
    emit(tx);
    credit(exchange, addr, amount);
  }

  void ensure_exchange_funds(std::uint32_t exchange, Amount need, Day d) {
    if (wallet_balance(wallets_[exchange]) < need) {
      Amount grant = std::max<Amount>(need * 4, 100 * kUnitsPerCoin);
      emit_coinbase(exchange, grant, d);
    }
    // Consolidating wallets spend everything they hold, so keeping a second
    // spendable address makes every exchange spend a multi-input transaction
    // that co-spends the previous change address.
    if (cfg_.change_addresses && wallets_[exchange].spendable.size() < 2) {
      emit_coinbase(exchange, 10 * kUnitsPerCoin, d);
    }
  }

  double day_rate(Day d) const { return rate_of_day_[d - price_first_]; }

  Amount usd_to_native(double usd, Day d) const {
    return std::llround(usd / day_rate(d) * static_cast<double>(kUnitsPerCoin));
  }

  double native_to_usd(Amount native, Day d) const {
    return static_cast<double>(native) / static_cast<double>(kUnitsPerCoin) *
           day_rate(d);
  }

  void record_contact(std::uint32_t user, int market, Day d) {
    Wallet& w = wallets_[user];
    std::uint64_t bit = 1ULL << market;
    std::uint64_t key = (static_cast<std::uint64_t>(user) << 8) |
                        static_cast<std::uint64_t>(market);
    if (!first_contact_.count(key)) {
      first_contact_[key] = d;
      contact_order_[static_cast<std::size_t>(market)].push_back(user);
      if (!(w.markets_touched & bit)) seasoned_[static_cast<std::size_t>(market)].push_back(user);
    }
    w.markets_touched |= bit;
  }

  // One payment from wallet `from` with a single primary recipient plus
  // optional extra outputs (market payouts). Returns false when the payer
  // cannot be funded.
  struct OutputSpec {
    std::uint32_t wallet;
    Amount amount;
  };

  bool emit_spend(std::uint32_t from, const std::vector<OutputSpec>& outs, Day d) {
    Wallet& payer = wallets_[from];
    Amount total_out = 0;
    for (const auto& o : outs) total_out += o.amount;
    Amount need = total_out + kFee;

    bool consolidate = payer.role != TagKind::unnamed;
    auto inputs = select_inputs(from, need, consolidate);
    if (inputs.empty()) return false;

    Amount in_total = 0;
    Transaction tx;
    tx.timestamp = next_ts(d);
    for (auto a : inputs) {
      tx.inputs.push_back({addr_name(a), balance_[a]});
      in_total += balance_[a];
      balance_[a] = 0;
    }
    // Spendable list keeps only untouched addresses.
    auto& sp = payer.spendable;
    sp.erase(std::remove_if(sp.begin(), sp.end(),
                            [&](std::uint32_t a) { return balance_[a] == 0; }),
             sp.end());

    struct Credit {
      std::uint32_t wallet, addr;
      Amount amount;
    };
    std::vector<Credit> credits;
    for (const auto& o : outs) {
      std::uint32_t addr = receive_address(o.wallet);
      tx.outputs.push_back({addr_name(addr), o.amount});
      credits.push_back({o.wallet, addr, o.amount});
    }

    Amount leftover = in_total - total_out - kFee;
    if (leftover > 0) {
      if (leftover < kDust && cfg_.change_addresses) {
        // Fold dust into the fee.
      } else {
        std::uint32_t change = cfg_.change_addresses
                                   ? new_address(from)
                                   : payer.receive;  // single-address wallet
        tx.outputs.push_back({addr_name(change), leftover});
        credits.push_back({from, change, leftover});
      }
    }
    emit(tx);
    for (const auto& c : credits) credit(c.wallet, c.addr, c.amount);

    // Truth bookkeeping mirrors the analyzer's entity-edge semantics.
    for (const auto& o : outs) {
      if (o.wallet == from) continue;
      const Wallet& dst = wallets_[o.wallet];
      const Wallet& src = payer;
      double usd = native_to_usd(o.amount, d);
      if (dst.role == TagKind::market && src.role != TagKind::exchange) {
        truth_.market_received_native[dst.tag_name] += o.amount;
        truth_.market_received_usd[dst.tag_name] += usd;
      }
      if (src.role == TagKind::market && dst.role != TagKind::exchange) {
        truth_.market_sent_native[src.tag_name] += o.amount;
        truth_.market_sent_usd[src.tag_name] += usd;
      }
      if (dst.role == TagKind::market && src.role == TagKind::unnamed) {
        record_contact(from, dst.market_index, d);
      }
      if (src.role == TagKind::market && dst.role == TagKind::unnamed) {
        record_contact(o.wallet, src.market_index, d);
      }
    }
    return true;
  }

  bool pay_user_to_market(std::uint32_t user, int market, Amount amount, Day d) {
    Wallet& u = wallets_[user];
    Amount need = amount + kFee;
    if (wallet_balance(u) < need) {
      Rng rng = root_.derive(kRngDeposit, static_cast<std::uint64_t>(d), user);
      Amount reserve = usd_to_native(
          cfg_.mean_payment_usd * (0.2 + rng.uniform_double()), d);
      Amount deposit = need - wallet_balance(u) + reserve;
      std::uint32_t exchange = exchange_for(user);
      ensure_exchange_funds(exchange, deposit + kFee, d);
      if (!emit_spend(exchange, {{user, deposit}}, d)) return false;
    }
    return emit_spend(user, {{static_cast<std::uint32_t>(market_wallet_[market]),
                              amount}},
                      d);
  }

  std::uint32_t exchange_for(std::uint32_t user) const {
    return exchange_wallet_[user % exchange_wallet_.size()];
  }

  // -- setup ----------------------------------------------------------------
  void setup();
  void setup_users();
  void bootstrap_market(int market, Day d);
  void process_closures(Day d);
  void run_market_day(int market, Day d);
  void market_payout(int market, Day d);
  void final_sweeps(Day d);
  void build_truth();

  std::vector<Amount> split_amounts(Amount total, std::size_t parts, Rng rng);

  double multiplier_on(Day d) const {
    double m = 1.0;
    for (const auto& [from, factor] : cfg_.volume_multiplier) {
      if (d >= from) m = factor;
    }
    return m;
  }

  const SynthConfig& cfg_;
  const std::function<void(const Transaction&)>& sink_;
  Rng root_;

  std::vector<Wallet> wallets_;
  std::vector<Amount> balance_;
  std::vector<std::size_t> market_wallet_;    // roster index -> wallet index
  std::vector<std::uint32_t> exchange_wallet_;
  std::vector<Pool> pools_;                   // per market
  std::vector<std::vector<std::uint32_t>> contact_order_;  // per market
  std::vector<std::vector<std::uint32_t>> seasoned_;       // per market
  std::unordered_map<std::uint64_t, Day> first_contact_;   // (wallet, market)
  std::map<Day, std::vector<ForcedPayment>> schedule_;
  std::vector<ClosureEvent> closures_;
  std::size_t next_closure_ = 0;
  std::vector<bool> bootstrapped_;
  std::map<std::string, std::vector<std::string>> scripted_dropouts_;

  std::vector<double> rate_of_day_;
  Day price_first_ = 0;

  struct WeightRamp {
    Day start = 0;
    std::vector<double> delta;  // per market
  };
  std::vector<double> live_weight_;  // updated instantly at closures
  std::vector<WeightRamp> ramps_;

  std::uint32_t tx_counter_ = 0;
  Day seq_day_ = std::numeric_limits<Day>::min();
  Timestamp seq_in_day_ = 0;

  GroundTruth truth_;

};

void Generator::setup() {
  price_first_ = cfg_.start - 1;
  rate_of_day_.resize(static_cast<std::size_t>(cfg_.end - price_first_) + 1);
  for (std::size_t i = 0; i < rate_of_day_.size(); ++i) {
    double phase = 2.0 * 3.141592653589793 * static_cast<double>(i) / 365.25;
    rate_of_day_[i] = cfg_.price_usd *
                      (1.0 + cfg_.price_amplitude * std::sin(phase));
  }

  std::size_t n_markets = cfg_.markets.size();
  market_wallet_.resize(n_markets);
  pools_.resize(n_markets);
  contact_order_.resize(n_markets);
  seasoned_.resize(n_markets);
  bootstrapped_.assign(n_markets, false);

  for (std::size_t m = 0; m < n_markets; ++m) {
    Wallet w;
    w.id = format_id("m", static_cast<std::uint32_t>(m), 2);
    w.role = TagKind::market;
    w.tag_name = cfg_.markets[m].name;
    w.market_index = static_cast<int>(m);
    market_wallet_[m] = wallets_.size();
    wallets_.push_back(std::move(w));
  }
  for (int e = 0; e < cfg_.exchanges; ++e) {
    Wallet w;
    w.id = format_id("x", static_cast<std::uint32_t>(e), 2);
    w.role = TagKind::exchange;
    w.tag_name = "exchange-" + std::to_string(e);
    exchange_wallet_.push_back(static_cast<std::uint32_t>(wallets_.size()));
    wallets_.push_back(std::move(w));
  }

  live_weight_.resize(n_markets);
  for (std::size_t m = 0; m < n_markets; ++m) {
    live_weight_[m] = m < cfg_.market_weights.size() ? cfg_.market_weights[m] : 1.0;
  }

  closures_ = closure_events(cfg_.markets);
  setup_users();
}

void Generator::setup_users() {
  // Discrete power-law weights on 1..1000.
  std::vector<double> cdf(1000);
  double acc = 0.0;
  for (std::size_t k = 1; k <= cdf.size(); ++k) {
    acc += std::pow(static_cast<double>(k), -cfg_.activity_exponent);
    cdf[k - 1] = acc;
  }

  // Home markets drawn proportional to weight x lifetime overlap.
  std::vector<double> market_cum(cfg_.markets.size(), 0.0);
  double total = 0.0;
  for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
    const auto& info = cfg_.markets[m];
    Day lo = std::max(info.start, cfg_.start);
    Day hi = std::min(info.end ? *info.end : cfg_.end, cfg_.end);
    double overlap = std::max(0, hi - lo);
    double weight = m < cfg_.market_weights.size() ? cfg_.market_weights[m] : 1.0;
    total += overlap * weight;
    market_cum[m] = total;
  }
  if (total <= 0.0) throw InvalidConfig("no market overlaps the generation range");

  for (int i = 0; i < cfg_.users; ++i) {
    Rng rng = root_.derive(kRngUsers, static_cast<std::uint64_t>(i));
    Wallet w;
    w.id = format_id("u", static_cast<std::uint32_t>(i), 7);
    w.role = TagKind::unnamed;
    double u = rng.uniform_double() * cdf.back();
    auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
    w.weight = static_cast<double>(it - cdf.begin()) + 1.0;
    w.one_shot = rng.uniform_double() < cfg_.one_shot_fraction;

    double pick = rng.uniform_double() * total;
    auto mit = std::lower_bound(market_cum.begin(), market_cum.end(), pick);
    auto home = static_cast<std::size_t>(mit - market_cum.begin());

    auto wallet_idx = static_cast<std::uint32_t>(wallets_.size());
    const auto& info = cfg_.markets[home];
    Day lo = std::max(info.start, cfg_.start);
    Day hi = std::min(info.end ? *info.end : cfg_.end, cfg_.end);

    w.home = static_cast<int>(home);
    if (w.one_shot) {
      Day d = static_cast<Day>(rng.uniform_int(lo, std::max(lo, hi - 1)));
      schedule_[d].push_back({static_cast<std::uint16_t>(home), wallet_idx});
    } else {
      pools_[home].add(wallet_idx, w.weight);
      if (rng.uniform_double() < cfg_.multihomed_fraction) {
        // Second market overlapping the home lifetime.
        std::vector<std::size_t> candidates;
        for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
          if (m == home) continue;
          const auto& other = cfg_.markets[m];
          Day o_lo = std::max({other.start, info.start, cfg_.start});
          Day o_hi = std::min({other.end ? *other.end : cfg_.end,
                               info.end ? *info.end : cfg_.end, cfg_.end});
          if (o_hi - o_lo > 2) candidates.push_back(m);
        }
        if (!candidates.empty()) {
          auto second = candidates[rng.uniform_u64(candidates.size())];
          pools_[second].add(wallet_idx, w.weight);
          const auto& other = cfg_.markets[second];
          Day o_lo = std::max({other.start, info.start, cfg_.start});
          schedule_[o_lo].push_back({static_cast<std::uint16_t>(home), wallet_idx});
          schedule_[o_lo + 1].push_back(
              {static_cast<std::uint16_t>(second), wallet_idx});
        }
      }
    }
    wallets_.push_back(std::move(w));
  }

  // Stationary per-user daily activity: calibrated so the expected number of
  // active payers per market-day matches the base volume / mean payment.
  for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
    double weight = m < cfg_.market_weights.size() ? cfg_.market_weights[m] : 1.0;
    double k = cfg_.base_daily_volume_usd * weight / cfg_.mean_payment_usd;
    const Pool& pool = pools_[m];
    if (pool.members.empty() || pool.weight_sum <= 0.0) continue;
    for (std::uint32_t member : pool.members) {
      Wallet& w = wallets_[member];
      if (w.home != static_cast<int>(m)) continue;  // rate set by the home pool
      w.daily_rate = std::clamp(k * w.weight / pool.weight_sum, 0.002, 0.9);
    }
  }
}

void Generator::bootstrap_market(int market, Day d) {
  if (bootstrapped_[static_cast<std::size_t>(market)]) return;
  bootstrapped_[static_cast<std::size_t>(market)] = true;
  std::uint32_t exchange = exchange_wallet_[static_cast<std::size_t>(market) %
                                            exchange_wallet_.size()];
  Amount launch = kUnitsPerCoin;  // 1 coin
  ensure_exchange_funds(exchange, launch + kFee, d);
  emit_spend(exchange, {{static_cast<std::uint32_t>(market_wallet_[
                             static_cast<std::size_t>(market)]),
                         launch}},
             d);
}

std::vector<Amount> Generator::split_amounts(Amount total, std::size_t parts, Rng rng) {
  std::vector<Amount> amounts(parts, 1);
  if (total <= static_cast<Amount>(parts)) return amounts;

  std::vector<double> weights(parts);
  double sum = 0.0;
  for (auto& w : weights) {
    w = 0.5 + rng.uniform_double();
    sum += w;
  }
  Amount assigned = 0;
  for (std::size_t i = 0; i < parts; ++i) {
    auto a = static_cast<Amount>(static_cast<double>(total) * weights[i] / sum);
    a = std::max<Amount>(a, 1);
    amounts[i] = a;
    assigned += a;
  }
  amounts.back() += total - assigned;  // exact total
  if (amounts.back() < 1) {
    // Rebalance from the largest slot.
    auto largest = std::max_element(amounts.begin(), amounts.end());
    *largest += amounts.back() - 1;
    amounts.back() = 1;
  }
  return amounts;
}

void Generator::process_closures(Day d) {
  while (next_closure_ < closures_.size() &&
         closures_[next_closure_].closure_date <= d) {
    const ClosureEvent& closure = closures_[next_closure_];
    ++next_closure_;
    if (closure.closure_date != d) continue;  // outside generation range

    int market = -1;
    for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
      if (cfg_.markets[m].name == closure.market) market = static_cast<int>(m);
    }
    if (market < 0) continue;

    if (cfg_.volume_recovery_days > 0) {
      // Survivors absorb the closed market's demand in proportion to their
      // weights; the ramp models the migration lag.
      double freed = live_weight_[static_cast<std::size_t>(market)];
      live_weight_[static_cast<std::size_t>(market)] = 0.0;
      double surviving = 0.0;
      for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
        if (cfg_.markets[m].active_on(d)) surviving += live_weight_[m];
      }
      if (freed > 0.0 && surviving > 0.0) {
        WeightRamp ramp;
        ramp.start = d;
        ramp.delta.assign(cfg_.markets.size(), 0.0);
        for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
          if (!cfg_.markets[m].active_on(d)) continue;
          ramp.delta[m] = freed * live_weight_[m] / surviving;
          live_weight_[m] += ramp.delta[m];
        }
        ramps_.push_back(std::move(ramp));
      }
    }

    std::uint64_t home_bit = 1ULL << market;
    std::vector<std::uint32_t> eligible;
    for (std::uint32_t w : contact_order_[static_cast<std::size_t>(market)]) {
      const Wallet& wallet = wallets_[w];
      if (wallet.role != TagKind::unnamed || wallet.one_shot) continue;
      if (!wallet.live_on(d)) continue;
      if (wallet.markets_touched != home_bit) continue;
      eligible.push_back(w);
    }

    Rng rng = root_.derive(kRngClosure, static_cast<std::uint64_t>(next_closure_));
    // Partial Fisher-Yates: the shuffled prefix drives both samples.
    for (std::size_t i = 0; i + 1 < eligible.size(); ++i) {
      std::size_t j = i + rng.uniform_u64(eligible.size() - i);
      std::swap(eligible[i], eligible[j]);
    }
    auto n_drop = static_cast<std::size_t>(std::llround(
        cfg_.migration.dropout_fraction * static_cast<double>(eligible.size())));
    auto n_rest = eligible.size() - n_drop;
    auto n_migrate = static_cast<std::size_t>(std::llround(
        cfg_.migration.migrant_fraction * static_cast<double>(n_rest)));

    // Destination softmax over pre-closure received volume, shared by
    // migrants and winding-down dropouts.
    std::vector<int> coex;
    for (const auto& name : closure.coexisting) {
      for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
        if (cfg_.markets[m].name == name) coex.push_back(static_cast<int>(m));
      }
    }
    double vmax = 1.0;
    for (int m : coex) {
      auto it = truth_.market_received_usd.find(
          cfg_.markets[static_cast<std::size_t>(m)].name);
      if (it != truth_.market_received_usd.end()) vmax = std::max(vmax, it->second);
    }
    std::vector<double> cum;
    double total = 0.0;
    for (int m : coex) {
      double v = 0.0;
      auto it = truth_.market_received_usd.find(
          cfg_.markets[static_cast<std::size_t>(m)].name);
      if (it != truth_.market_received_usd.end()) v = it->second;
      // Max-shifted softmax stays finite for arbitrarily strong coordination.
      total += std::exp(cfg_.migration.coordination_strength * (v - vmax) / vmax);
      cum.push_back(total);
    }

    auto& dropout_list = scripted_dropouts_[closure.market];
    for (std::size_t i = 0; i < eligible.size(); ++i) {
      Wallet& w = wallets_[eligible[i]];
      bool quitter = i < n_drop;
      bool migrant = !quitter && i < n_drop + n_migrate;
      if (quitter) dropout_list.push_back(w.id);
      if (!quitter && !migrant) {
        // Leaves the ecosystem with the closure.
        w.active_until = d - 1;
        continue;
      }
      if (coex.empty()) {
        w.active_until = d - 1;
        continue;
      }
      // Re-engage with the destination after a decision delay; activity then
      // follows the user's own stationary daily rate. Dropouts wind down
      // within the linger window and go silent for good.
      Day delay = static_cast<Day>(rng.uniform_int(
          cfg_.migration.delay_min_days, cfg_.migration.delay_max_days));
      int primary = coex[rng.pick_weighted(cum)];
      w.active_from = d + delay;
      if (quitter) {
        w.active_until = d + cfg_.migration.dropout_linger_days;
      }
      pools_[static_cast<std::size_t>(primary)].add(eligible[i], w.weight);
      if (!quitter && coex.size() > 1 &&
          rng.uniform_double() < cfg_.migration.multi_destination_fraction) {
        for (int attempt = 0; attempt < 8; ++attempt) {
          int second = coex[rng.pick_weighted(cum)];
          if (second == primary) continue;
          pools_[static_cast<std::size_t>(second)].add(eligible[i], w.weight);
          break;
        }
      }
    }
  }
}

void Generator::run_market_day(int market, Day d) {
  auto mi = static_cast<std::size_t>(market);
  double weight = mi < cfg_.market_weights.size() ? cfg_.market_weights[mi] : 1.0;
  for (const auto& ramp : ramps_) {
    if (ramp.delta[mi] == 0.0 || d < ramp.start) continue;
    double frac = cfg_.volume_recovery_days <= 1
                      ? 1.0
                      : std::min(1.0, static_cast<double>(d - ramp.start + 1) /
                                          static_cast<double>(cfg_.volume_recovery_days));
    weight += ramp.delta[mi] * frac;
  }
  double target_usd = cfg_.base_daily_volume_usd * weight * multiplier_on(d);
  if (target_usd <= 0.0) return;
  Amount target_native = usd_to_native(target_usd, d);
  if (target_native < 1) return;

  // Scheduled slots first (one-shots and multihomed introductions), then
  // every pool member whose own daily activity fires.
  std::vector<std::uint32_t> payers;
  auto due = schedule_.find(d);
  if (due != schedule_.end()) {
    for (const auto& f : due->second) {
      if (f.market != static_cast<std::uint16_t>(market)) continue;
      if (!wallets_[f.user].live_on(d)) continue;
      payers.push_back(f.user);
    }
  }

  const Pool& pool = pools_[mi];
  for (std::uint32_t member : pool.members) {
    const Wallet& w = wallets_[member];
    if (!w.live_on(d) || w.daily_rate <= 0.0) continue;
    Rng flip = root_.derive(kRngPayers,
                            (static_cast<std::uint64_t>(mi) << 32) |
                                static_cast<std::uint64_t>(member),
                            static_cast<std::uint64_t>(d));
    if (flip.uniform_double() < w.daily_rate) payers.push_back(member);
  }
  if (payers.empty()) {
    // Keep the scripted volume exact even on a dead-quiet day.
    for (std::uint32_t member : pool.members) {
      if (wallets_[member].live_on(d)) {
        payers.push_back(member);
        break;
      }
    }
  }
  if (payers.empty()) return;

  auto amounts = split_amounts(
      target_native, payers.size(),
      root_.derive(kRngAmounts, static_cast<std::uint64_t>(d),
                   static_cast<std::uint64_t>(market)));
  std::size_t emitted = 0;
  for (std::size_t i = 0; i < payers.size(); ++i) {
    if (pay_user_to_market(payers[i], market, amounts[i], d)) ++emitted;
  }

  if (cfg_.u2u_fraction > 0.0 && emitted > 0) {
    Rng u2u = root_.derive(kRngU2u, static_cast<std::uint64_t>(d),
                           static_cast<std::uint64_t>(market));
    auto& pool_seasoned = seasoned_[static_cast<std::size_t>(market)];
    auto n = static_cast<std::size_t>(cfg_.u2u_fraction *
                                      static_cast<double>(emitted));
    for (std::size_t i = 0; i < n && pool_seasoned.size() >= 2; ++i) {
      std::uint32_t a = pool_seasoned[u2u.uniform_u64(pool_seasoned.size())];
      std::uint32_t b = pool_seasoned[u2u.uniform_u64(pool_seasoned.size())];
      if (a == b) continue;
      Amount amt = usd_to_native(cfg_.mean_payment_usd *
                                 (0.01 + 0.09 * u2u.uniform_double()), d);
      amt = std::max<Amount>(amt, 1);
      if (wallet_balance(wallets_[a]) < amt + kFee) continue;
      emit_spend(a, {{b, amt}}, d);
    }
  }
}

void Generator::market_payout(int market, Day d) {
  const auto mi = static_cast<std::size_t>(market);
  std::uint32_t mw = static_cast<std::uint32_t>(market_wallet_[mi]);
  Amount balance = wallet_balance(wallets_[mw]);
  if (balance < 200 * kFee) return;

  Amount cash_out = balance * 7 / 10;
  Amount vendor_total = balance / 4;

  std::vector<OutputSpec> outs;
  std::uint32_t exchange = exchange_wallet_[mi % exchange_wallet_.size()];
  outs.push_back({exchange, cash_out});

  Rng rng = root_.derive(kRngVendors, static_cast<std::uint64_t>(d),
                         static_cast<std::uint64_t>(market));
  auto& seasoned = seasoned_[mi];
  std::size_t n_vendors = std::min<std::size_t>(3, seasoned.size());
  if (n_vendors > 0) {
    Amount share = vendor_total / static_cast<Amount>(n_vendors);
    if (share > 0) {
      for (std::size_t v = 0; v < n_vendors; ++v) {
        std::uint32_t w = seasoned[rng.uniform_u64(seasoned.size())];
        if (!wallets_[w].live_on(d)) continue;  // silenced users get nothing
        outs.push_back({w, share});
      }
    }
  }
  emit_spend(mw, outs, d);
}

void Generator::final_sweeps(Day d) {
  if (!cfg_.final_consolidation) return;
  for (std::size_t e = 0; e < exchange_wallet_.size(); ++e) {
    // Keep the receive address funded so the sweep is a multi-input spend
    // that consolidates any change address still dangling.
    std::uint32_t x = exchange_wallet_[e];
    if (wallets_[x].addresses.size() >= 2) {
      emit_coinbase(x, 10 * kUnitsPerCoin, d);
    }
  }
  for (std::uint32_t w = 0; w < wallets_.size(); ++w) {
    Wallet& wallet = wallets_[w];
    if (wallet.spendable.size() < 2) continue;
    Amount balance = wallet_balance(wallet);
    if (balance <= kFee + 1) continue;
    emit_spend(w, {{w, balance - kFee}}, d);
  }
}

void Generator::build_truth() {
  for (std::uint32_t w = 0; w < wallets_.size(); ++w) {
    const Wallet& wallet = wallets_[w];
    GroundTruth::Wallet tw;
    tw.id = wallet.id;
    tw.role = wallet.role;
    tw.tag_name = wallet.tag_name;
    for (auto a : wallet.addresses) tw.addresses.push_back(addr_name(a));
    if (wallet.one_shot && !wallet.addresses.empty()) ++truth_.one_shot_users;
    truth_.wallets.push_back(std::move(tw));
  }

  auto contact = [&](std::uint32_t w, int m) -> std::optional<Day> {
    auto it = first_contact_.find((static_cast<std::uint64_t>(w) << 8) |
                                  static_cast<std::uint64_t>(m));
    if (it == first_contact_.end()) return std::nullopt;
    return it->second;
  };
  std::unordered_map<std::string, int> market_idx;
  for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
    market_idx[cfg_.markets[m].name] = static_cast<int>(m);
  }

  for (const auto& closure : closures_) {
    GroundTruth::Closure tc;
    tc.market = closure.market;
    tc.date = closure.closure_date;
    int home = market_idx.at(closure.market);
    Day dc = closure.closure_date;

    std::vector<int> coex;
    for (const auto& name : closure.coexisting) coex.push_back(market_idx.at(name));

    for (std::uint32_t w : contact_order_[static_cast<std::size_t>(home)]) {
      auto home_day = contact(w, home);
      if (!home_day || *home_day >= dc) continue;
      ++tc.user_count;
      const Wallet& wallet = wallets_[w];

      bool excluded = false;
      for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
        if (static_cast<int>(m) == home) continue;
        if (auto day = contact(w, static_cast<int>(m)); day && *day < dc) {
          excluded = true;
          break;
        }
      }
      if (excluded) {
        tc.multihomed_excluded.push_back(wallet.id);
        continue;
      }

      Day first_coex = std::numeric_limits<Day>::max();
      for (int m : coex) {
        if (auto day = contact(w, m)) first_coex = std::min(first_coex, *day);
      }
      if (first_coex == std::numeric_limits<Day>::max() || first_coex <= dc) continue;

      GroundTruth::Migrant mig;
      mig.wallet = wallet.id;
      mig.first_day = first_coex;
      for (int m : coex) {
        if (auto day = contact(w, m); day && *day > dc) {
          mig.destinations.emplace_back(
              cfg_.markets[static_cast<std::size_t>(m)].name, *day);
        }
      }
      std::sort(mig.destinations.begin(), mig.destinations.end());
      tc.migrants.push_back(std::move(mig));
    }
    if (auto it = scripted_dropouts_.find(closure.market);
        it != scripted_dropouts_.end()) {
      tc.dropouts = it->second;
    }
    std::sort(tc.migrants.begin(), tc.migrants.end(),
              [](const auto& a, const auto& b) { return a.wallet < b.wallet; });
    std::sort(tc.dropouts.begin(), tc.dropouts.end());
    std::sort(tc.multihomed_excluded.begin(), tc.multihomed_excluded.end());
    truth_.closures.push_back(std::move(tc));
  }
}

GroundTruth Generator::run() {
  setup();
  for (Day d = cfg_.start; d < cfg_.end; ++d) {
    process_closures(d);
    for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
      if (!cfg_.markets[m].active_on(d)) continue;
      bootstrap_market(static_cast<int>(m), d);
      run_market_day(static_cast<int>(m), d);
    }
    for (std::size_t m = 0; m < cfg_.markets.size(); ++m) {
      if (!cfg_.markets[m].active_on(d)) continue;
      if ((d - cfg_.markets[m].start) % cfg_.market_payout_interval_days ==
          cfg_.market_payout_interval_days - 1) {
        market_payout(static_cast<int>(m), d);
      }
    }
  }
  final_sweeps(cfg_.end - 1);
  build_truth();
  return std::move(truth_);
}

}  // namespace

void validate_config(const SynthConfig& config) {
  if (!config.seed_set) throw InvalidConfig("seed is mandatory");
  if (config.markets.empty()) throw InvalidConfig("at least one market required");
  if (config.markets.size() > 64) throw InvalidConfig("at most 64 markets supported");
  validate_roster(config.markets);
  if (config.end <= config.start) throw InvalidConfig("end must follow start");
  if (config.users < 1) throw InvalidConfig("users must be >= 1");
  if (config.exchanges < 1) throw InvalidConfig("exchanges must be >= 1");
  auto frac = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!frac(config.one_shot_fraction) || !frac(config.multihomed_fraction) ||
      !frac(config.migration.migrant_fraction) ||
      !frac(config.migration.dropout_fraction) ||
      !frac(config.migration.multi_destination_fraction)) {
    throw InvalidConfig("fractions must lie in [0, 1]");
  }
  if (config.migration.delay_min_days < 1 ||
      config.migration.delay_max_days < config.migration.delay_min_days) {
    throw InvalidConfig("bad migration delay range");
  }
  if (config.price_usd <= 0.0 || std::abs(config.price_amplitude) >= 1.0) {
    throw InvalidConfig("bad price parameters");
  }
  if (config.base_daily_volume_usd <= 0.0 || config.mean_payment_usd <= 0.0) {
    throw InvalidConfig("volumes must be positive");
  }
}

SynthData generate(const SynthConfig& config) {
  validate_config(config);
  std::vector<Transaction> txs;
  auto sink = [&](const Transaction& tx) { txs.push_back(tx); };
  std::function<void(const Transaction&)> fn = sink;
  Generator gen(config, fn);

  SynthData data;
  data.truth = gen.run();
  data.ledger = Ledger::from_transactions(std::move(txs));
  data.roster = config.markets;
  for (Day d = config.start - 1; d <= config.end; ++d) {
    double phase = 2.0 * 3.141592653589793 *
                   static_cast<double>(d - (config.start - 1)) / 365.25;
    data.prices.add(d, config.price_usd *
                           (1.0 + config.price_amplitude * std::sin(phase)));
  }
  for (const auto& w : data.truth.wallets) {
    if (w.role == TagKind::unnamed || w.addresses.empty()) continue;
    Seed s;
    s.address = w.addresses.front();
    s.tag.kind = w.role;
    s.tag.name = w.tag_name;
    data.seeds.push_back(std::move(s));
  }
  return data;
}

GeneratedFiles generate_files(const SynthConfig& config, const std::string& out_dir) {
  validate_config(config);
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  GeneratedFiles files;
  files.ledger_path = (fs::path(out_dir) / "ledger.jsonl").string();
  files.prices_path = (fs::path(out_dir) / "prices.csv").string();
  files.seeds_path = (fs::path(out_dir) / "seeds.csv").string();
  files.markets_path = (fs::path(out_dir) / "markets.csv").string();
  files.ground_truth_path = (fs::path(out_dir) / "ground_truth.json").string();

  std::ofstream ledger_out(files.ledger_path);
  if (!ledger_out) throw Error("cannot write " + files.ledger_path);

  // Stream transactions straight to disk.
  AddressIndex scratch;
  std::string buf;
  std::size_t count = 0;
  auto sink = [&](const Transaction& tx) {
    buf.clear();
    buf += "{\"tx_id\":\"";
    buf += tx.tx_id;
    buf += "\",\"timestamp\":";
    buf += std::to_string(tx.timestamp);
    buf += ",\"inputs\":[";
    for (std::size_t i = 0; i < tx.inputs.size(); ++i) {
      if (i) buf += ',';
      buf += "{\"address\":\"";
      buf += tx.inputs[i].address;
      buf += "\",\"amount\":";
      buf += std::to_string(tx.inputs[i].amount);
      buf += '}';
    }
    buf += "],\"outputs\":[";
    for (std::size_t i = 0; i < tx.outputs.size(); ++i) {
      if (i) buf += ',';
      buf += "{\"address\":\"";
      buf += tx.outputs[i].address;
      buf += "\",\"amount\":";
      buf += std::to_string(tx.outputs[i].amount);
      buf += '}';
    }
    buf += ']';
    if (tx.usd_rate) {
      buf += ",\"usd_rate\":";
      buf += format_double(*tx.usd_rate);
    }
    buf += "}\n";
    ledger_out << buf;
    ++count;
  };
  std::function<void(const Transaction&)> fn = sink;
  Generator gen(config, fn);
  GroundTruth truth = gen.run();
  ledger_out.close();
  files.transactions = count;

  PriceSeries prices;
  for (Day d = config.start - 1; d <= config.end; ++d) {
    double phase = 2.0 * 3.141592653589793 *
                   static_cast<double>(d - (config.start - 1)) / 365.25;
    prices.add(d, config.price_usd *
                      (1.0 + config.price_amplitude * std::sin(phase)));
  }
  std::ofstream prices_out(files.prices_path);
  prices.to_csv(prices_out);

  std::vector<Seed> seeds;
  for (const auto& w : truth.wallets) {
    if (w.role == TagKind::unnamed || w.addresses.empty()) continue;
    seeds.push_back({w.addresses.front(), {w.role, w.tag_name}});
  }
  std::ofstream seeds_out(files.seeds_path);
  seeds_to_csv(seeds_out, seeds);

  std::ofstream markets_out(files.markets_path);
  roster_to_csv(markets_out, config.markets);

  std::ofstream truth_out(files.ground_truth_path);
  truth_out << truth.to_json();
  return files;
}

}  // namespace dmflow
