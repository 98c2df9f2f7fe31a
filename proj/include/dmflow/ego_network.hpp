#pragma once

#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "dmflow/clustering.hpp"
#include "dmflow/common.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/prices.hpp"

namespace dmflow {

enum class NodeRole { market, neighbor, other };

std::string to_string(NodeRole r);

struct TimeWindow {
  Timestamp begin = std::numeric_limits<Timestamp>::min();
  Timestamp end = std::numeric_limits<Timestamp>::max();  // exclusive

  bool contains(Timestamp ts) const { return ts >= begin && ts < end; }
  static TimeWindow all() { return {}; }
};

// Entity-level transfer: one edge per (source entity, output entity) pair of
// a transaction. Self-transfers (change) and coinbase issuance carry no
// entity edge.
struct EntityEdge {
  EntityId src = kNoEntity;
  EntityId dst = kNoEntity;
  Timestamp timestamp = 0;
  Amount native = 0;
  double usd = 0.0;
};

// Invokes fn(EntityEdge) for each transfer edge of `tx`. USD comes from the
// transaction's own rate when present, otherwise from `prices` (required).
void for_each_transfer(const LedgerTx& tx, const EntityPartition& partition,
                       const PriceSeries* prices,
                       const std::function<void(const EntityEdge&)>& fn);

struct EgoEdge {
  EntityId src = kNoEntity;
  EntityId dst = kNoEntity;
  Timestamp timestamp = 0;
  double usd = 0.0;
};

struct EgoNetwork {
  EntityId market = kNoEntity;
  std::vector<std::pair<EntityId, NodeRole>> nodes;  // sorted by entity id
  std::vector<EgoEdge> edges;                        // ledger order

  std::optional<NodeRole> role_of(EntityId e) const;
  std::size_t node_count() const { return nodes.size(); }
};

// Timestamp of each entity's first transaction with any market-tagged
// entity, computed over the whole ledger.
class FirstMarketContact {
 public:
  explicit FirstMarketContact(const EntityPartition& partition);
  void observe(const LedgerTx& tx, const EntityPartition& partition);
  std::optional<Timestamp> first(EntityId e) const;
  bool is_market(EntityId e) const { return e < market_.size() && market_[e]; }

 private:
  std::vector<bool> market_;
  std::vector<Timestamp> first_;
};

// Radius-2 egocentric network of `market`:
//   (1) every market-incident edge inside the window;
//   (2) every edge of a neighbor (an entity with a market edge inside the
//       window) at or after that neighbor's first market contact;
//   (3) no edge between two "other" nodes.
// Throws UnknownMarket when `market` is not tagged as a market.
EgoNetwork build_ego_network(EntityId market, const Ledger& ledger,
                             const EntityPartition& partition,
                             const PriceSeries* prices,
                             TimeWindow window = TimeWindow::all());

EgoNetwork build_ego_network(const std::string& market_name, const Ledger& ledger,
                             const EntityPartition& partition,
                             const PriceSeries* prices,
                             TimeWindow window = TimeWindow::all());

// Drops every edge with an exchange-tagged endpoint, then nodes left
// isolated (the ego market node is always kept).
EgoNetwork filter_exchanges(const EgoNetwork& network, const EntityPartition& partition);

// Ledger variant: drops transactions touching an exchange-tagged entity on
// either side.
Ledger filter_exchanges(const Ledger& ledger, const EntityPartition& partition);

struct MarketTotals {
  double sent_usd = 0.0;
  double received_usd = 0.0;
  std::size_t in_degree = 0;   // distinct entities that sent to the market
  std::size_t out_degree = 0;  // distinct entities the market sent to
};

MarketTotals network_totals(const EgoNetwork& network);

void ego_edges_to_csv(std::ostream& out, const EgoNetwork& network);
void ego_nodes_to_csv(std::ostream& out, const EgoNetwork& network,
                      const EntityPartition& partition);

}  // namespace dmflow
