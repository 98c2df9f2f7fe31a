#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dmflow/common.hpp"
#include "dmflow/ledger.hpp"

namespace dmflow {

enum class TagKind { market, exchange, named_other, unnamed };

std::string to_string(TagKind k);
TagKind tag_kind_from_string(const std::string& s);

struct Tag {
  TagKind kind = TagKind::unnamed;
  std::string name;

  bool tagged() const { return kind != TagKind::unnamed; }
  bool operator==(const Tag&) const = default;
};

struct Seed {
  std::string address;
  Tag tag;
};

// CSV with header: address,tag_kind,name
std::vector<Seed> seeds_from_csv(std::istream& in);
std::vector<Seed> seeds_from_csv_file(const std::string& path);
void seeds_to_csv(std::ostream& out, const std::vector<Seed>& seeds);

// Immutable address -> entity partition with per-entity tags. Entity ids are
// dense and assigned in order of each entity's lowest address id, so equal
// partitions compare equal regardless of how they were built.
class EntityPartition {
 public:
  EntityPartition() = default;
  EntityPartition(std::vector<EntityId> entity_by_addr, std::vector<Tag> tags);

  std::size_t address_count() const { return entity_by_addr_.size(); }
  std::size_t entity_count() const { return tags_.size(); }

  EntityId entity_of(AddressId a) const;
  const Tag& tag(EntityId e) const;

  bool has_kind(EntityId e, TagKind k) const { return tag(e).kind == k; }
  std::optional<EntityId> entity_named(TagKind kind, std::string_view name) const;
  std::vector<EntityId> entities_with_kind(TagKind kind) const;

  bool operator==(const EntityPartition&) const = default;

  // CSV with header: address,entity_id,tag_kind,name
  void to_csv(std::ostream& out, const AddressIndex& addrs) const;
  // Interns every address into `addrs` (in file order) and returns the
  // partition aligned to those ids.
  static EntityPartition from_csv(std::istream& in, AddressIndex& addrs);
  static EntityPartition from_csv_file(const std::string& path, AddressIndex& addrs);

 private:
  std::vector<EntityId> entity_by_addr_;
  std::vector<Tag> tags_;
};

struct ChangeConflict {
  std::string tx_id;
  AddressId change_address = kNoAddress;
  Tag input_tag;
  Tag change_tag;
};

struct ChangeLinkReport {
  std::size_t links_applied = 0;
  std::size_t candidates_seen = 0;
  std::vector<ChangeConflict> conflicts;
};

// Tracks which addresses have already appeared, for the change heuristic.
// Observe transactions in (timestamp, tx_id) order, after running detection
// on them.
class UsageIndex {
 public:
  bool seen(AddressId a) const { return a < seen_.size() && seen_[a]; }
  bool seen_as_output(AddressId a) const {
    return a < out_seen_.size() && out_seen_[a];
  }
  void observe(const LedgerTx& tx);

 private:
  std::vector<bool> seen_;
  std::vector<bool> out_seen_;
};

// Conservative change detection. Returns the unique output address that
// (a) first appears in the ledger at this transaction, (b) was never an
// output of an earlier transaction, (c) is not among this transaction's
// inputs, and (d) is the only output satisfying (a)-(c). Transactions with
// no inputs or fewer than two outputs never produce a candidate.
std::optional<AddressId> detect_change(const LedgerTx& tx, const UsageIndex& usage);

// Incremental partition construction shared by the in-memory wrappers and
// the streaming pipeline.
class PartitionBuilder {
 public:
  PartitionBuilder() = default;
  explicit PartitionBuilder(const EntityPartition& base);

  // Pass 1: union all input addresses of each transaction; register outputs.
  void observe_cospend(const LedgerTx& tx);

  // Attach tags to the entities of seed addresses.
  // Throws UnknownAddress / SeedConflict.
  void apply_seeds(const std::vector<Seed>& seeds, const AddressIndex& addrs);

  // Pass 2 (chronological): detect a change output and union it with the
  // entity of the transaction's inputs unless that would merge two entities
  // carrying different tags (recorded in `report`, link skipped).
  void observe_change(const LedgerTx& tx, ChangeLinkReport* report = nullptr);

  EntityPartition snapshot() const;

 private:
  AddressId find(AddressId a);
  void ensure(AddressId a);
  bool unite(AddressId a, AddressId b, ChangeLinkReport* report,
             const std::string& tx_id, AddressId change_addr);

  std::vector<AddressId> parent_;
  std::vector<std::uint32_t> rank_;
  std::vector<Tag> root_tag_;  // meaningful at roots only
  UsageIndex usage_;
};

// All input addresses of each non-coinbase transaction belong to one entity;
// the result is the transitive closure over the ledger. Output addresses are
// registered as singletons unless already linked.
EntityPartition co_spend_cluster(const Ledger& ledger);

// Applies conservative change links on top of a co-spend base partition.
EntityPartition apply_change_links(const Ledger& ledger, const EntityPartition& base,
                                   ChangeLinkReport* report = nullptr);

// Tags each seed's entity; untouched entities stay unnamed.
// Throws SeedConflict / UnknownAddress.
EntityPartition tag_entities(const EntityPartition& partition,
                             const std::vector<Seed>& seeds,
                             const AddressIndex& addrs);

}  // namespace dmflow
