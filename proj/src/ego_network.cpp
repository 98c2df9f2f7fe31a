#include "dmflow/ego_network.hpp"

#include <algorithm>
#include <limits>
#include <ostream>
#include <unordered_set>

#include "dmflow/csv.hpp"
#include "dmflow/errors.hpp"

namespace dmflow {

std::string to_string(NodeRole r) {
  switch (r) {
    case NodeRole::market: return "market";
    case NodeRole::neighbor: return "neighbor";
    case NodeRole::other: return "other";
  }
  return "other";
}

void for_each_transfer(const LedgerTx& tx, const EntityPartition& partition,
                       const PriceSeries* prices,
                       const std::function<void(const EntityEdge&)>& fn) {
  if (tx.is_coinbase()) return;
  double rate;
  if (tx.usd_rate) {
    rate = *tx.usd_rate;
  } else if (prices) {
    rate = prices->rate_at(tx.timestamp);
  } else {
    throw MissingInput("price series (ledger records carry no usd_rate)");
  }
  EntityId src = partition.entity_of(tx.inputs.front().first);
  EntityEdge edge;
  edge.src = src;
  edge.timestamp = tx.timestamp;
  for (const auto& [addr, amount] : tx.outputs) {
    EntityId dst = partition.entity_of(addr);
    if (dst == src) continue;
    edge.dst = dst;
    edge.native = amount;
    edge.usd = static_cast<double>(amount) /
               static_cast<double>(kUnitsPerCoin) * rate;
    fn(edge);
  }
}

std::optional<NodeRole> EgoNetwork::role_of(EntityId e) const {
  auto it = std::lower_bound(nodes.begin(), nodes.end(), e,
                             [](const auto& p, EntityId v) { return p.first < v; });
  if (it == nodes.end() || it->first != e) return std::nullopt;
  return it->second;
}

FirstMarketContact::FirstMarketContact(const EntityPartition& partition)
    : market_(partition.entity_count(), false),
      first_(partition.entity_count(), std::numeric_limits<Timestamp>::max()) {
  for (EntityId e = 0; e < partition.entity_count(); ++e) {
    market_[e] = partition.has_kind(e, TagKind::market);
  }
}

void FirstMarketContact::observe(const LedgerTx& tx, const EntityPartition& partition) {
  if (tx.is_coinbase()) return;
  EntityId src = partition.entity_of(tx.inputs.front().first);
  for (const auto& [addr, amount] : tx.outputs) {
    EntityId dst = partition.entity_of(addr);
    if (dst == src) continue;
    if (market_[src] && !market_[dst]) {
      first_[dst] = std::min(first_[dst], tx.timestamp);
    }
    if (market_[dst] && !market_[src]) {
      first_[src] = std::min(first_[src], tx.timestamp);
    }
  }
}

std::optional<Timestamp> FirstMarketContact::first(EntityId e) const {
  if (e >= first_.size() || first_[e] == std::numeric_limits<Timestamp>::max()) {
    return std::nullopt;
  }
  return first_[e];
}

EgoNetwork build_ego_network(EntityId market, const Ledger& ledger,
                             const EntityPartition& partition,
                             const PriceSeries* prices, TimeWindow window) {
  if (market >= partition.entity_count() ||
      !partition.has_kind(market, TagKind::market)) {
    throw UnknownMarket("entity " + std::to_string(market));
  }

  FirstMarketContact contact(partition);
  for (const auto& tx : ledger.transactions()) contact.observe(tx, partition);

  // Neighbors: entities with at least one edge to/from this market inside
  // the window.
  std::vector<bool> neighbor(partition.entity_count(), false);
  for (const auto& tx : ledger.transactions()) {
    if (!window.contains(tx.timestamp)) continue;
    for_each_transfer(tx, partition, prices, [&](const EntityEdge& e) {
      if (e.src == market && e.dst != market) neighbor[e.dst] = true;
      if (e.dst == market && e.src != market) neighbor[e.src] = true;
    });
  }

  EgoNetwork net;
  net.market = market;
  std::vector<bool> present(partition.entity_count(), false);
  present[market] = true;

  auto qualifies = [&](const EntityEdge& e) {
    if (e.src == market || e.dst == market) return true;
    auto fs = contact.first(e.src);
    if (neighbor[e.src] && fs && e.timestamp >= *fs) return true;
    auto fd = contact.first(e.dst);
    if (neighbor[e.dst] && fd && e.timestamp >= *fd) return true;
    return false;
  };

  for (const auto& tx : ledger.transactions()) {
    if (!window.contains(tx.timestamp)) continue;
    for_each_transfer(tx, partition, prices, [&](const EntityEdge& e) {
      if (!qualifies(e)) return;
      net.edges.push_back({e.src, e.dst, e.timestamp, e.usd});
      present[e.src] = true;
      present[e.dst] = true;
    });
  }

  for (EntityId e = 0; e < partition.entity_count(); ++e) {
    if (!present[e]) continue;
    NodeRole role = e == market ? NodeRole::market
                    : neighbor[e] ? NodeRole::neighbor
                                  : NodeRole::other;
    net.nodes.emplace_back(e, role);
  }
  return net;
}

EgoNetwork build_ego_network(const std::string& market_name, const Ledger& ledger,
                             const EntityPartition& partition,
                             const PriceSeries* prices, TimeWindow window) {
  auto entity = partition.entity_named(TagKind::market, market_name);
  if (!entity) throw UnknownMarket(market_name);
  return build_ego_network(*entity, ledger, partition, prices, window);
}

EgoNetwork filter_exchanges(const EgoNetwork& network, const EntityPartition& partition) {
  auto is_exchange = [&](EntityId e) {
    return partition.has_kind(e, TagKind::exchange);
  };
  EgoNetwork out;
  out.market = network.market;
  std::unordered_set<EntityId> present;
  present.insert(network.market);
  for (const auto& e : network.edges) {
    if (is_exchange(e.src) || is_exchange(e.dst)) continue;
    out.edges.push_back(e);
    present.insert(e.src);
    present.insert(e.dst);
  }
  for (const auto& [entity, role] : network.nodes) {
    if (present.count(entity)) out.nodes.emplace_back(entity, role);
  }
  return out;
}

Ledger filter_exchanges(const Ledger& ledger, const EntityPartition& partition) {
  auto is_exchange = [&](AddressId a) {
    return partition.has_kind(partition.entity_of(a), TagKind::exchange);
  };
  std::vector<Transaction> kept;
  for (const auto& tx : ledger.transactions()) {
    bool touches = false;
    for (const auto& [a, amt] : tx.inputs) touches |= is_exchange(a);
    for (const auto& [a, amt] : tx.outputs) touches |= is_exchange(a);
    if (touches) continue;
    Transaction t;
    t.tx_id = tx.tx_id;
    t.timestamp = tx.timestamp;
    t.usd_rate = tx.usd_rate;
    for (const auto& [a, amt] : tx.inputs) {
      t.inputs.push_back({std::string(ledger.addresses().name(a)), amt});
    }
    for (const auto& [a, amt] : tx.outputs) {
      t.outputs.push_back({std::string(ledger.addresses().name(a)), amt});
    }
    kept.push_back(std::move(t));
  }
  return Ledger::from_transactions(std::move(kept));
}

MarketTotals network_totals(const EgoNetwork& network) {
  MarketTotals totals;
  std::unordered_set<EntityId> senders, receivers;
  for (const auto& e : network.edges) {
    if (e.dst == network.market) {
      totals.received_usd += e.usd;
      senders.insert(e.src);
    }
    if (e.src == network.market) {
      totals.sent_usd += e.usd;
      receivers.insert(e.dst);
    }
  }
  totals.in_degree = senders.size();
  totals.out_degree = receivers.size();
  return totals;
}

void ego_edges_to_csv(std::ostream& out, const EgoNetwork& network) {
  out << "src_entity,dst_entity,timestamp,usd\n";
  for (const auto& e : network.edges) {
    out << e.src << ',' << e.dst << ',' << e.timestamp << ','
        << format_double(e.usd) << '\n';
  }
}

void ego_nodes_to_csv(std::ostream& out, const EgoNetwork& network,
                      const EntityPartition& partition) {
  out << "entity_id,role,tag_kind,name\n";
  for (const auto& [entity, role] : network.nodes) {
    const Tag& tag = partition.tag(entity);
    csv::write_row(out, {std::to_string(entity), to_string(role),
                         to_string(tag.kind), tag.name});
  }
}

}  // namespace dmflow
