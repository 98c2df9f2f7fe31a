#pragma once

#include <deque>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmflow/common.hpp"

namespace dmflow {

struct TxIo {
  std::string address;
  Amount amount = 0;
};

// One value transfer. Empty inputs denote a coinbase (issuance) transaction;
// that is the only empty-input form accepted.
struct Transaction {
  std::string tx_id;
  Timestamp timestamp = 0;
  std::vector<TxIo> inputs;
  std::vector<TxIo> outputs;
  std::optional<double> usd_rate;  // USD per coin at `timestamp`

  bool is_coinbase() const { return inputs.empty(); }
  Amount input_total() const;
  Amount output_total() const;
  Amount fee() const { return input_total() - output_total(); }
};

struct ValidationResult {
  enum class Code { ok, zero_amount, negative_fee };
  Code code = Code::ok;
  std::string detail;
  bool ok() const { return code == Code::ok; }
};

ValidationResult validate_transaction(const Transaction& tx);

// Interns address strings to dense 32-bit ids, shared across streaming passes.
class AddressIndex {
 public:
  AddressIndex() = default;
  AddressIndex(const AddressIndex& other);
  AddressIndex& operator=(const AddressIndex& other);
  AddressIndex(AddressIndex&&) = default;
  AddressIndex& operator=(AddressIndex&&) = default;

  AddressId intern(std::string_view name);
  std::optional<AddressId> find(std::string_view name) const;
  std::string_view name(AddressId id) const { return names_[id]; }
  std::size_t size() const { return names_.size(); }

 private:
  struct Hash {
    using is_transparent = void;
    std::size_t operator()(std::string_view s) const noexcept {
      return std::hash<std::string_view>{}(s);
    }
  };
  std::deque<std::string> names_;  // element addresses are stable
  std::unordered_map<std::string_view, AddressId, Hash, std::equal_to<>> map_;
};

// Interned transaction, the unit all analysis passes consume.
struct LedgerTx {
  std::string tx_id;
  Timestamp timestamp = 0;
  std::vector<std::pair<AddressId, Amount>> inputs;
  std::vector<std::pair<AddressId, Amount>> outputs;
  std::optional<double> usd_rate;

  bool is_coinbase() const { return inputs.empty(); }
  Amount input_total() const;
  Amount output_total() const;
};

enum class LedgerFormat { jsonl };

struct ScanOptions {
  // off:         caller handles duplicates (e.g. Ledger::load's exact check).
  // fingerprint: 64-bit fingerprint set; spurious collisions are vanishingly
  //              rare but memory grows with the transaction count.
  // bloom:       fixed 8 MiB filter; possible duplicates land in `flagged`
  //              for a targeted second pass (see verify_flagged_duplicates).
  enum class DupCheck { off, fingerprint, bloom };
  DupCheck dup_check = DupCheck::fingerprint;
  std::vector<std::string>* flagged = nullptr;  // required in bloom mode
  bool require_sorted = false;  // (timestamp, tx_id) strictly increasing
};

// Streams a JSON Lines ledger, invoking `fn` per record in file order.
// Memory stays bounded by the address index plus an 8-byte duplicate
// fingerprint per record; transactions themselves are not retained.
// Throws ParseError, ValidationError, DuplicateTxId.
std::size_t scan_jsonl(std::istream& in, AddressIndex& addrs,
                       const std::function<void(const LedgerTx&)>& fn,
                       const ScanOptions& opts = {});

std::size_t scan_jsonl_file(const std::string& path, AddressIndex& addrs,
                            const std::function<void(const LedgerTx&)>& fn,
                            const ScanOptions& opts = {});

// Second pass of the bloom duplicate check: re-reads the file counting
// occurrences of the flagged ids and throws DuplicateTxId on a real one.
void verify_flagged_duplicates(const std::string& path,
                               const std::vector<std::string>& flagged);

// Canonical single-line serialization (no whitespace, fixed key order,
// shortest round-trip numbers). Appends a trailing '\n'.
void serialize_tx(const LedgerTx& tx, const AddressIndex& addrs, std::string& out);

// Fully loaded ledger: transactions sorted by (timestamp, tx_id), unique ids.
class Ledger {
 public:
  static Ledger load(std::istream& in, LedgerFormat format = LedgerFormat::jsonl);
  static Ledger load_file(const std::string& path,
                          LedgerFormat format = LedgerFormat::jsonl);

  void serialize(std::ostream& out) const;

  const AddressIndex& addresses() const { return addrs_; }
  AddressIndex& addresses() { return addrs_; }
  const std::vector<LedgerTx>& transactions() const { return txs_; }
  std::size_t size() const { return txs_.size(); }
  bool empty() const { return txs_.empty(); }

  Timestamp first_timestamp() const;
  Timestamp last_timestamp() const;

  struct Totals {
    Amount total_in = 0;        // sum of all inputs
    Amount total_out = 0;       // sum of all outputs
    Amount total_fees = 0;      // non-coinbase input excess
    Amount coinbase_issued = 0; // coinbase output total
  };
  Totals totals() const;

  // Test and tooling hook: build directly from records.
  static Ledger from_transactions(std::vector<Transaction> txs);

 private:
  AddressIndex addrs_;
  std::vector<LedgerTx> txs_;

  void sort_and_check();
};

}  // namespace dmflow
