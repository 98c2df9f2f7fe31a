#include "dmflow/clustering.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>
#include <unordered_map>

#include "dmflow/csv.hpp"
#include "dmflow/errors.hpp"

namespace dmflow {

std::string to_string(TagKind k) {
  switch (k) {
    case TagKind::market: return "market";
    case TagKind::exchange: return "exchange";
    case TagKind::named_other: return "named";
    case TagKind::unnamed: return "unnamed";
  }
  return "unnamed";
}

TagKind tag_kind_from_string(const std::string& s) {
  if (s == "market") return TagKind::market;
  if (s == "exchange") return TagKind::exchange;
  if (s == "named") return TagKind::named_other;
  if (s == "unnamed") return TagKind::unnamed;
  throw ValidationError("unknown tag kind '" + s + "'");
}

std::vector<Seed> seeds_from_csv(std::istream& in) {
  auto rows = csv::read_rows(in, "address,tag_kind,name");
  std::vector<Seed> seeds;
  std::size_t lineno = 1;
  for (const auto& row : rows) {
    ++lineno;
    if (row.size() != 3) throw ParseError(lineno, "expected 3 columns");
    Seed s;
    s.address = row[0];
    s.tag.kind = tag_kind_from_string(row[1]);
    s.tag.name = row[2];
    if (s.tag.kind != TagKind::unnamed && s.tag.name.empty()) {
      throw ParseError(lineno, "tagged seed requires a name");
    }
    seeds.push_back(std::move(s));
  }
  return seeds;
}

std::vector<Seed> seeds_from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  return seeds_from_csv(in);
}

void seeds_to_csv(std::ostream& out, const std::vector<Seed>& seeds) {
  out << "address,tag_kind,name\n";
  for (const auto& s : seeds) {
    csv::write_row(out, {s.address, to_string(s.tag.kind), s.tag.name});
  }
}

EntityPartition::EntityPartition(std::vector<EntityId> entity_by_addr,
                                 std::vector<Tag> tags)
    : entity_by_addr_(std::move(entity_by_addr)), tags_(std::move(tags)) {}

EntityId EntityPartition::entity_of(AddressId a) const {
  if (a >= entity_by_addr_.size()) {
    throw OutOfRange("address id " + std::to_string(a) + " not in partition");
  }
  return entity_by_addr_[a];
}

const Tag& EntityPartition::tag(EntityId e) const {
  if (e >= tags_.size()) {
    throw OutOfRange("entity id " + std::to_string(e) + " not in partition");
  }
  return tags_[e];
}

std::optional<EntityId> EntityPartition::entity_named(TagKind kind,
                                                      std::string_view name) const {
  for (EntityId e = 0; e < tags_.size(); ++e) {
    if (tags_[e].kind == kind && tags_[e].name == name) return e;
  }
  return std::nullopt;
}

std::vector<EntityId> EntityPartition::entities_with_kind(TagKind kind) const {
  std::vector<EntityId> out;
  for (EntityId e = 0; e < tags_.size(); ++e) {
    if (tags_[e].kind == kind) out.push_back(e);
  }
  return out;
}

void EntityPartition::to_csv(std::ostream& out, const AddressIndex& addrs) const {
  out << "address,entity_id,tag_kind,name\n";
  for (AddressId a = 0; a < entity_by_addr_.size(); ++a) {
    EntityId e = entity_by_addr_[a];
    csv::write_row(out, {std::string(addrs.name(a)), std::to_string(e),
                         to_string(tags_[e].kind), tags_[e].name});
  }
}

EntityPartition EntityPartition::from_csv(std::istream& in, AddressIndex& addrs) {
  auto rows = csv::read_rows(in, "address,entity_id,tag_kind,name");
  std::vector<EntityId> entity_by_addr;
  std::vector<Tag> tags;
  std::size_t lineno = 1;
  for (const auto& row : rows) {
    ++lineno;
    if (row.size() != 4) throw ParseError(lineno, "expected 4 columns");
    AddressId a = addrs.intern(row[0]);
    if (a != entity_by_addr.size()) {
      throw ParseError(lineno, "address order inconsistent with earlier rows");
    }
    EntityId e = 0;
    auto [p, ec] = std::from_chars(row[1].data(), row[1].data() + row[1].size(), e);
    if (ec != std::errc{} || p != row[1].data() + row[1].size()) {
      throw ParseError(lineno, "bad entity id '" + row[1] + "'");
    }
    Tag tag;
    tag.kind = tag_kind_from_string(row[2]);
    tag.name = row[3];
    if (e >= tags.size()) tags.resize(e + 1);
    tags[e] = tag;
    entity_by_addr.push_back(e);
  }
  return EntityPartition(std::move(entity_by_addr), std::move(tags));
}

EntityPartition EntityPartition::from_csv_file(const std::string& path,
                                               AddressIndex& addrs) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  return from_csv(in, addrs);
}

void UsageIndex::observe(const LedgerTx& tx) {
  auto mark = [](std::vector<bool>& v, AddressId a) {
    if (a >= v.size()) v.resize(a + 1, false);
    v[a] = true;
  };
  for (const auto& [a, amt] : tx.inputs) mark(seen_, a);
  for (const auto& [a, amt] : tx.outputs) {
    mark(seen_, a);
    mark(out_seen_, a);
  }
}

std::optional<AddressId> detect_change(const LedgerTx& tx, const UsageIndex& usage) {
  if (tx.inputs.empty() || tx.outputs.size() < 2) return std::nullopt;

  AddressId candidate = kNoAddress;
  for (const auto& [addr, amount] : tx.outputs) {
    if (addr == candidate) continue;  // same fresh address listed twice
    if (usage.seen(addr)) continue;                             // (a)
    if (usage.seen_as_output(addr)) continue;                   // (b)
    bool is_input = false;
    for (const auto& [in_addr, in_amt] : tx.inputs) {
      if (in_addr == addr) {
        is_input = true;
        break;
      }
    }
    if (is_input) continue;                                     // (c)
    if (candidate != kNoAddress) return std::nullopt;           // (d)
    candidate = addr;
  }
  if (candidate == kNoAddress) return std::nullopt;
  return candidate;
}

PartitionBuilder::PartitionBuilder(const EntityPartition& base) {
  std::vector<AddressId> rep(base.entity_count(), kNoAddress);
  parent_.reserve(base.address_count());
  for (AddressId a = 0; a < base.address_count(); ++a) {
    ensure(a);
    EntityId e = base.entity_of(a);
    if (rep[e] == kNoAddress) {
      rep[e] = a;
      root_tag_[find(a)] = base.tag(e);
    } else {
      Tag tag = base.tag(e);
      unite(rep[e], a, nullptr, {}, kNoAddress);
      root_tag_[find(a)] = tag;
    }
  }
}

void PartitionBuilder::ensure(AddressId a) {
  while (parent_.size() <= a) {
    parent_.push_back(static_cast<AddressId>(parent_.size()));
    rank_.push_back(0);
    root_tag_.emplace_back();
  }
}

AddressId PartitionBuilder::find(AddressId a) {
  AddressId root = a;
  while (parent_[root] != root) root = parent_[root];
  while (parent_[a] != root) {
    AddressId next = parent_[a];
    parent_[a] = root;
    a = next;
  }
  return root;
}

bool PartitionBuilder::unite(AddressId a, AddressId b, ChangeLinkReport* report,
                             const std::string& tx_id, AddressId change_addr) {
  AddressId ra = find(a), rb = find(b);
  if (ra == rb) return true;
  const Tag& ta = root_tag_[ra];
  const Tag& tb = root_tag_[rb];
  if (ta.tagged() && tb.tagged() && ta != tb) {
    if (report) {
      report->conflicts.push_back({tx_id, change_addr, ta, tb});
    }
    return false;
  }
  Tag merged = ta.tagged() ? ta : tb;
  if (rank_[ra] < rank_[rb]) std::swap(ra, rb);
  parent_[rb] = ra;
  if (rank_[ra] == rank_[rb]) ++rank_[ra];
  root_tag_[ra] = std::move(merged);
  return true;
}

void PartitionBuilder::observe_cospend(const LedgerTx& tx) {
  for (const auto& [a, amt] : tx.outputs) ensure(a);
  if (tx.inputs.empty()) return;
  AddressId first = tx.inputs.front().first;
  ensure(first);
  for (std::size_t i = 1; i < tx.inputs.size(); ++i) {
    AddressId a = tx.inputs[i].first;
    ensure(a);
    unite(first, a, nullptr, {}, kNoAddress);
  }
}

void PartitionBuilder::apply_seeds(const std::vector<Seed>& seeds,
                                   const AddressIndex& addrs) {
  for (const auto& seed : seeds) {
    auto id = addrs.find(seed.address);
    if (!id || *id >= parent_.size()) throw UnknownAddress(seed.address);
    AddressId root = find(*id);
    Tag& current = root_tag_[root];
    if (current.tagged() && current != seed.tag) {
      throw SeedConflict(to_string(current.kind) + ":" + current.name,
                         to_string(seed.tag.kind) + ":" + seed.tag.name);
    }
    current = seed.tag;
  }
}

void PartitionBuilder::observe_change(const LedgerTx& tx, ChangeLinkReport* report) {
  for (const auto& [a, amt] : tx.inputs) ensure(a);
  for (const auto& [a, amt] : tx.outputs) ensure(a);
  if (auto change = detect_change(tx, usage_)) {
    if (report) ++report->candidates_seen;
    if (unite(tx.inputs.front().first, *change, report, tx.tx_id, *change)) {
      if (report) ++report->links_applied;
    }
  }
  usage_.observe(tx);
}

EntityPartition PartitionBuilder::snapshot() const {
  // find() without mutation: chase parents.
  auto find_const = [this](AddressId a) {
    while (parent_[a] != a) a = parent_[a];
    return a;
  };
  std::vector<EntityId> entity_by_addr(parent_.size(), kNoEntity);
  std::vector<EntityId> root_entity(parent_.size(), kNoEntity);
  std::vector<Tag> tags;
  for (AddressId a = 0; a < parent_.size(); ++a) {
    AddressId root = find_const(a);
    if (root_entity[root] == kNoEntity) {
      root_entity[root] = static_cast<EntityId>(tags.size());
      tags.push_back(root_tag_[root]);
    }
    entity_by_addr[a] = root_entity[root];
  }
  return EntityPartition(std::move(entity_by_addr), std::move(tags));
}

EntityPartition co_spend_cluster(const Ledger& ledger) {
  PartitionBuilder builder;
  for (const auto& tx : ledger.transactions()) builder.observe_cospend(tx);
  return builder.snapshot();
}

EntityPartition apply_change_links(const Ledger& ledger, const EntityPartition& base,
                                   ChangeLinkReport* report) {
  PartitionBuilder builder(base);
  for (const auto& tx : ledger.transactions()) builder.observe_change(tx, report);
  return builder.snapshot();
}

EntityPartition tag_entities(const EntityPartition& partition,
                             const std::vector<Seed>& seeds,
                             const AddressIndex& addrs) {
  std::vector<Tag> tags(partition.entity_count());
  for (EntityId e = 0; e < partition.entity_count(); ++e) tags[e] = partition.tag(e);
  for (const auto& seed : seeds) {
    auto id = addrs.find(seed.address);
    if (!id || *id >= partition.address_count()) throw UnknownAddress(seed.address);
    EntityId e = partition.entity_of(*id);
    if (tags[e].tagged() && tags[e] != seed.tag) {
      throw SeedConflict(to_string(tags[e].kind) + ":" + tags[e].name,
                         to_string(seed.tag.kind) + ":" + seed.tag.name);
    }
    tags[e] = seed.tag;
  }
  std::vector<EntityId> mapping(partition.address_count());
  for (AddressId a = 0; a < partition.address_count(); ++a) {
    mapping[a] = partition.entity_of(a);
  }
  return EntityPartition(std::move(mapping), std::move(tags));
}

}  // namespace dmflow
