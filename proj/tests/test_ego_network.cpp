#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <set>

#include "dmflow/ego_network.hpp"
#include "dmflow/errors.hpp"
#include "dmflow/rng.hpp"
#include "test_util.hpp"

using namespace dmflow;
using dmflow::testing::make_tx;

namespace {

// One-address-per-entity ledger: every tx is a single-input single-output
// transfer, so the co-spend partition is all singletons and entity ids map
// 1:1 to addresses.
struct Scenario {
  Ledger ledger;
  EntityPartition partition;
  EntityId market_of(const std::string& name) const {
    return *partition.entity_named(TagKind::market, name);
  }
};

Scenario build(const std::vector<Transaction>& txs, const std::vector<Seed>& seeds) {
  Scenario s_out{Ledger::from_transactions(txs), {}};
  s_out.partition = tag_entities(co_spend_cluster(s_out.ledger), seeds,
                                 s_out.ledger.addresses());
  return s_out;
}

Transaction pay(std::string id, Timestamp ts, const std::string& from,
                const std::string& to, Amount amount) {
  auto tx = make_tx(std::move(id), ts, {{from, amount}}, {{to, amount}});
  tx.usd_rate = 100.0;  // 1 coin = 100 USD
  return tx;
}

using EdgeKey = std::tuple<EntityId, EntityId, Timestamp>;

std::multiset<EdgeKey> edge_keys(const EgoNetwork& net) {
  std::multiset<EdgeKey> keys;
  for (const auto& e : net.edges) keys.insert({e.src, e.dst, e.timestamp});
  return keys;
}

}  // namespace

TEST_CASE("single payer produces a two-node network") {
  auto s = build({pay("t1", 100, "x", "M", 50)}, {{"M", {TagKind::market, "M"}}});
  auto net = build_ego_network("M", s.ledger, s.partition, nullptr);
  CHECK(net.node_count() == 2);
  CHECK(net.edges.size() == 1);
  auto role = net.role_of(s.partition.entity_of(*s.ledger.addresses().find("x")));
  REQUIRE(role.has_value());
  CHECK(*role == NodeRole::neighbor);
}

TEST_CASE("edges before a neighbor's first market contact are excluded") {
  // y pays x at t0, x first touches the market at t1 > t0.
  auto s = build({pay("t0", 100, "y", "x", 10), pay("t1", 200, "x", "M", 5)},
                 {{"M", {TagKind::market, "M"}}});
  auto net = build_ego_network("M", s.ledger, s.partition, nullptr);
  CHECK(net.edges.size() == 1);
  CHECK(net.edges[0].timestamp == 200);
  // y never becomes a node.
  auto y = s.partition.entity_of(*s.ledger.addresses().find("y"));
  CHECK_FALSE(net.role_of(y).has_value());
}

TEST_CASE("neighbor activity after first contact is included, other-other is not") {
  auto s = build(
      {
          pay("t1", 100, "x", "M", 5),   // x becomes a neighbor
          pay("t2", 200, "y", "x", 10),  // neighbor <-> other, after contact
          pay("t3", 300, "y", "z", 10),  // other <-> other, excluded
      },
      {{"M", {TagKind::market, "M"}}});
  auto net = build_ego_network("M", s.ledger, s.partition, nullptr);
  CHECK(net.edges.size() == 2);
  auto y = s.partition.entity_of(*s.ledger.addresses().find("y"));
  auto z = s.partition.entity_of(*s.ledger.addresses().find("z"));
  CHECK(net.role_of(y) == NodeRole::other);
  CHECK_FALSE(net.role_of(z).has_value());
}

TEST_CASE("unknown market raises") {
  auto s = build({pay("t1", 100, "x", "M", 5)}, {{"M", {TagKind::market, "M"}}});
  CHECK_THROWS_AS(build_ego_network("nope", s.ledger, s.partition, nullptr),
                  UnknownMarket);
}

TEST_CASE("exchange filter drops exchange edges and isolated nodes") {
  auto s = build(
      {
          pay("t1", 100, "x", "M", 5),
          pay("t2", 200, "E", "x", 10),  // exchange funding a neighbor
          pay("t3", 300, "E", "M", 1),   // exchange <-> market
      },
      {{"M", {TagKind::market, "M"}}, {"E", {TagKind::exchange, "E"}}});
  auto net = build_ego_network("M", s.ledger, s.partition, nullptr);
  CHECK(net.edges.size() == 3);
  auto filtered = filter_exchanges(net, s.partition);
  CHECK(filtered.edges.size() == 1);
  auto e = s.partition.entity_of(*s.ledger.addresses().find("E"));
  CHECK_FALSE(filtered.role_of(e).has_value());

  SUBCASE("filter is idempotent") {
    auto twice = filter_exchanges(filtered, s.partition);
    CHECK(edge_keys(twice) == edge_keys(filtered));
    CHECK(twice.nodes == filtered.nodes);
  }
}

TEST_CASE("no exchange tags means the filter is the identity") {
  auto s = build({pay("t1", 100, "x", "M", 5), pay("t2", 200, "y", "x", 3)},
                 {{"M", {TagKind::market, "M"}}});
  auto net = build_ego_network("M", s.ledger, s.partition, nullptr);
  auto filtered = filter_exchanges(net, s.partition);
  CHECK(edge_keys(filtered) == edge_keys(net));
}

TEST_CASE("all neighbors exchanges leaves the lone market node") {
  auto s = build({pay("t1", 100, "E", "M", 5)},
                 {{"M", {TagKind::market, "M"}}, {"E", {TagKind::exchange, "E"}}});
  auto net = build_ego_network("M", s.ledger, s.partition, nullptr);
  auto filtered = filter_exchanges(net, s.partition);
  CHECK(filtered.edges.empty());
  CHECK(filtered.node_count() == 1);
  CHECK(filtered.nodes[0].second == NodeRole::market);
}

TEST_CASE("totals: received, sent and distinct-counterpart degrees") {
  auto s = build(
      {
          pay("t1", 100, "x", "M", 50),  // 50 coins = 5000 USD? no: 50 units
          pay("t2", 200, "x", "M", 30),
          pay("t3", 300, "M", "y", 20),
      },
      {{"M", {TagKind::market, "M"}}});
  auto net = build_ego_network("M", s.ledger, s.partition, nullptr);
  auto totals = network_totals(net);
  double unit_usd = 100.0 / static_cast<double>(kUnitsPerCoin);
  CHECK(totals.received_usd == doctest::Approx(80 * unit_usd));
  CHECK(totals.sent_usd == doctest::Approx(20 * unit_usd));
  CHECK(totals.in_degree == 1);  // both payments from the same entity
  CHECK(totals.out_degree == 1);
}

TEST_CASE("single incoming edge gives received-only totals") {
  auto s = build({pay("t1", 100, "x", "M", 50 * kUnitsPerCoin)},
                 {{"M", {TagKind::market, "M"}}});
  auto totals = network_totals(build_ego_network("M", s.ledger, s.partition, nullptr));
  CHECK(totals.received_usd == doctest::Approx(5000.0));
  CHECK(totals.sent_usd == 0.0);
  CHECK(totals.in_degree == 1);
  CHECK(totals.out_degree == 0);
}

TEST_CASE("randomized ledgers match the brute-force membership predicate") {
  Rng rng(404);
  for (int seed_trial = 0; seed_trial < 20; ++seed_trial) {
    // ~200 entities: 2 markets, 1 exchange, the rest plain users.
    const int n_entities = 200;
    std::vector<std::string> names;
    for (int i = 0; i < n_entities; ++i) names.push_back("e" + std::to_string(i));
    std::vector<Transaction> txs;
    for (int i = 0; i < 600; ++i) {
      auto a = rng.uniform_u64(n_entities);
      auto b = rng.uniform_u64(n_entities);
      if (a == b) continue;
      // Bias some traffic toward the markets so they have neighbors.
      if (rng.bernoulli(0.4)) b = rng.uniform_u64(2);
      if (a == b) continue;
      txs.push_back(pay("t" + std::to_string(1000 + i),
                        1000 + static_cast<Timestamp>(rng.uniform_u64(5000)),
                        names[a], names[b], 10 + static_cast<Amount>(rng.uniform_u64(90))));
    }
    auto s = build(txs, {{"e0", {TagKind::market, "M0"}},
                         {"e1", {TagKind::market, "M1"}},
                         {"e2", {TagKind::exchange, "X"}}});
    EntityId market = s.market_of("M0");

    // Brute force: apply the three membership rules edge by edge.
    struct RawEdge {
      EntityId src, dst;
      Timestamp ts;
    };
    std::vector<RawEdge> all;
    for (const auto& tx : s.ledger.transactions()) {
      for_each_transfer(tx, s.partition, nullptr, [&](const EntityEdge& e) {
        all.push_back({e.src, e.dst, e.timestamp});
      });
    }
    auto is_market = [&](EntityId e) { return s.partition.has_kind(e, TagKind::market); };
    std::map<EntityId, Timestamp> first_any;
    for (const auto& e : all) {
      if (is_market(e.src) && !is_market(e.dst)) {
        if (!first_any.count(e.dst) || e.ts < first_any[e.dst]) first_any[e.dst] = e.ts;
      }
      if (is_market(e.dst) && !is_market(e.src)) {
        if (!first_any.count(e.src) || e.ts < first_any[e.src]) first_any[e.src] = e.ts;
      }
    }
    std::set<EntityId> neighbors;
    for (const auto& e : all) {
      if (e.src == market && e.dst != market) neighbors.insert(e.dst);
      if (e.dst == market && e.src != market) neighbors.insert(e.src);
    }
    std::multiset<EdgeKey> expected;
    for (const auto& e : all) {
      bool keep = e.src == market || e.dst == market;
      if (!keep && neighbors.count(e.src) && first_any.count(e.src) &&
          e.ts >= first_any[e.src]) {
        keep = true;
      }
      if (!keep && neighbors.count(e.dst) && first_any.count(e.dst) &&
          e.ts >= first_any[e.dst]) {
        keep = true;
      }
      if (keep) expected.insert({e.src, e.dst, e.ts});
    }

    auto net = build_ego_network(market, s.ledger, s.partition, nullptr);
    CHECK(edge_keys(net) == expected);

    // No other-other edge ever appears.
    for (const auto& e : net.edges) {
      bool src_other = net.role_of(e.src) == NodeRole::other;
      bool dst_other = net.role_of(e.dst) == NodeRole::other;
      CHECK_FALSE((src_other && dst_other));
    }
    // Every neighbor touches the market.
    for (const auto& [entity, role] : net.nodes) {
      if (role != NodeRole::neighbor) continue;
      bool touches = false;
      for (const auto& e : net.edges) {
        touches |= (e.src == entity && e.dst == market) ||
                   (e.dst == entity && e.src == market);
      }
      CHECK(touches);
    }
  }
}

TEST_CASE("window limits market edges and neighbor status") {
  auto s = build(
      {
          pay("t1", 100, "x", "M", 5),
          pay("t2", 5000, "x", "M", 5),
          pay("t3", 5100, "y", "x", 3),
      },
      {{"M", {TagKind::market, "M"}}});
  // Window excluding t1: x is still a neighbor (t2 inside), and the y->x
  // edge is included because x's first market contact (t1, ledger-wide)
  // precedes it.
  auto net = build_ego_network(s.market_of("M"), s.ledger, s.partition, nullptr,
                               {4000, 6000});
  CHECK(net.edges.size() == 2);
  // Window covering only t3: x has no market edge inside, so nothing remains.
  auto net2 = build_ego_network(s.market_of("M"), s.ledger, s.partition, nullptr,
                                {5050, 6000});
  CHECK(net2.edges.empty());
}

TEST_CASE("union of disjoint market networks conserves dataset volume") {
  Rng rng(808);
  std::vector<Transaction> txs;
  int id = 0;
  // Two disjoint market communities plus background noise.
  for (int m = 0; m < 2; ++m) {
    std::string market = "M" + std::to_string(m);
    for (int i = 0; i < 40; ++i) {
      std::string user = "u" + std::to_string(m) + "_" + std::to_string(i % 8);
      txs.push_back(pay("t" + std::to_string(id++),
                        1000 + static_cast<Timestamp>(rng.uniform_u64(2000)), user,
                        market, 10 + static_cast<Amount>(rng.uniform_u64(100))));
    }
    for (int i = 0; i < 10; ++i) {
      std::string u1 = "u" + std::to_string(m) + "_" + std::to_string(i % 8);
      std::string u2 = "w" + std::to_string(m) + "_" + std::to_string(i % 5);
      txs.push_back(pay("t" + std::to_string(id++),
                        4000 + static_cast<Timestamp>(rng.uniform_u64(1000)), u1, u2,
                        5 + static_cast<Amount>(rng.uniform_u64(20))));
    }
  }
  for (int i = 0; i < 15; ++i) {  // other-other noise, never in scope
    txs.push_back(pay("t" + std::to_string(id++),
                      1000 + static_cast<Timestamp>(rng.uniform_u64(4000)),
                      "n" + std::to_string(i % 4), "n" + std::to_string(5 + i % 4),
                      3));
  }
  auto s = build(txs, {{"M0", {TagKind::market, "M0"}},
                       {"M1", {TagKind::market, "M1"}}});

  double union_usd = 0.0;
  std::set<std::tuple<EntityId, EntityId, Timestamp, long long>> seen;
  for (const char* m : {"M0", "M1"}) {
    auto net = build_ego_network(m, s.ledger, s.partition, nullptr);
    for (const auto& e : net.edges) {
      auto key = std::make_tuple(e.src, e.dst, e.timestamp,
                                 static_cast<long long>(e.usd * 1e6));
      if (seen.insert(key).second) union_usd += e.usd;
    }
  }

  // Direct ledger predicate: edge qualifies for the dataset if it is
  // market-incident or an endpoint has already contacted a market.
  auto is_market = [&](EntityId e) { return s.partition.has_kind(e, TagKind::market); };
  std::map<EntityId, Timestamp> first_any;
  std::vector<EntityEdge> all;
  for (const auto& tx : s.ledger.transactions()) {
    for_each_transfer(tx, s.partition, nullptr,
                      [&](const EntityEdge& e) { all.push_back(e); });
  }
  for (const auto& e : all) {
    if (is_market(e.src) && !is_market(e.dst)) {
      if (!first_any.count(e.dst) || e.timestamp < first_any[e.dst]) {
        first_any[e.dst] = e.timestamp;
      }
    }
    if (is_market(e.dst) && !is_market(e.src)) {
      if (!first_any.count(e.src) || e.timestamp < first_any[e.src]) {
        first_any[e.src] = e.timestamp;
      }
    }
  }
  double direct_usd = 0.0;
  for (const auto& e : all) {
    bool keep = is_market(e.src) || is_market(e.dst);
    if (!keep && first_any.count(e.src) && e.timestamp >= first_any[e.src]) keep = true;
    if (!keep && first_any.count(e.dst) && e.timestamp >= first_any[e.dst]) keep = true;
    if (keep) direct_usd += e.usd;
  }
  CHECK(union_usd == doctest::Approx(direct_usd).epsilon(1e-9));
}
