#include "dmflow/ledger.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <unordered_map>
#include <unordered_set>

#include "dmflow/errors.hpp"

namespace dmflow {

namespace {

Amount sum_amounts(const std::vector<TxIo>& v) {
  Amount s = 0;
  for (const auto& io : v) s += io.amount;
  return s;
}

Amount sum_amounts(const std::vector<std::pair<AddressId, Amount>>& v) {
  Amount s = 0;
  for (const auto& [a, amt] : v) s += amt;
  return s;
}

ValidationResult check_amounts(bool coinbase, Amount in_total, Amount out_total,
                               bool any_nonpositive) {
  if (any_nonpositive) {
    return {ValidationResult::Code::zero_amount, "all amounts must be > 0"};
  }
  if (!coinbase && out_total > in_total) {
    return {ValidationResult::Code::negative_fee,
            "outputs exceed inputs by " + std::to_string(out_total - in_total)};
  }
  return {};
}

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Recursive-descent parser for one ledger record. The schema is fixed
// (documented in the repo README); unknown keys are rejected so that typos in
// hand-written files fail loudly instead of being silently ignored.
class LineParser {
 public:
  LineParser(const char* begin, const char* end) : p_(begin), end_(end) {}

  void parse_record(LedgerTx& tx, AddressIndex& addrs) {
    bool saw_id = false, saw_ts = false, saw_in = false, saw_out = false;
    expect('{');
    if (!try_consume('}')) {
      do {
        std::string_view key = parse_string();
        expect(':');
        if (key == "tx_id") {
          tx.tx_id = std::string(parse_string());
          saw_id = true;
        } else if (key == "timestamp") {
          tx.timestamp = parse_int();
          saw_ts = true;
        } else if (key == "inputs") {
          parse_io_array(tx.inputs, addrs);
          saw_in = true;
        } else if (key == "outputs") {
          parse_io_array(tx.outputs, addrs);
          saw_out = true;
        } else if (key == "usd_rate") {
          tx.usd_rate = parse_double();
        } else {
          fail("unknown field '" + std::string(key) + "'");
        }
      } while (try_consume(','));
      expect('}');
    }
    skip_ws();
    if (p_ != end_) fail("trailing characters after record");
    if (!saw_id) fail("missing field 'tx_id'");
    if (tx.tx_id.empty()) fail("empty tx_id");
    if (!saw_ts) fail("missing field 'timestamp'");
    if (!saw_in) fail("missing field 'inputs'");
    if (!saw_out) fail("missing field 'outputs'");
  }

 private:
  void parse_io_array(std::vector<std::pair<AddressId, Amount>>& out,
                      AddressIndex& addrs) {
    out.clear();
    expect('[');
    if (try_consume(']')) return;
    do {
      expect('{');
      AddressId addr = kNoAddress;
      Amount amount = 0;
      bool saw_addr = false, saw_amount = false;
      do {
        std::string_view key = parse_string();
        expect(':');
        if (key == "address") {
          addr = addrs.intern(parse_string());
          saw_addr = true;
        } else if (key == "amount") {
          amount = parse_int();
          saw_amount = true;
        } else {
          fail("unknown field '" + std::string(key) + "' in input/output");
        }
      } while (try_consume(','));
      expect('}');
      if (!saw_addr) fail("input/output missing 'address'");
      if (!saw_amount) fail("input/output missing 'amount'");
      out.emplace_back(addr, amount);
    } while (try_consume(','));
    expect(']');
  }

  std::string_view parse_string() {
    skip_ws();
    if (p_ == end_ || *p_ != '"') fail("expected string");
    ++p_;
    const char* start = p_;
    while (p_ != end_ && *p_ != '"' && *p_ != '\\') ++p_;
    if (p_ != end_ && *p_ == '"') {  // fast path: no escapes
      std::string_view sv(start, static_cast<std::size_t>(p_ - start));
      ++p_;
      return sv;
    }
    scratch_.assign(start, static_cast<std::size_t>(p_ - start));
    while (p_ != end_ && *p_ != '"') {
      if (*p_ == '\\') {
        ++p_;
        if (p_ == end_) fail("unterminated escape");
        switch (*p_) {
          case '"': scratch_ += '"'; break;
          case '\\': scratch_ += '\\'; break;
          case '/': scratch_ += '/'; break;
          case 'b': scratch_ += '\b'; break;
          case 'f': scratch_ += '\f'; break;
          case 'n': scratch_ += '\n'; break;
          case 'r': scratch_ += '\r'; break;
          case 't': scratch_ += '\t'; break;
          case 'u': parse_unicode_escape(); break;
          default: fail("bad escape");
        }
        ++p_;
      } else {
        scratch_ += *p_++;
      }
    }
    if (p_ == end_) fail("unterminated string");
    ++p_;
    return scratch_;
  }

  void parse_unicode_escape() {
    if (end_ - p_ < 5) fail("bad \\u escape");
    unsigned cp = 0;
    for (int i = 1; i <= 4; ++i) {
      char c = p_[i];
      cp <<= 4;
      if (c >= '0' && c <= '9') cp |= static_cast<unsigned>(c - '0');
      else if (c >= 'a' && c <= 'f') cp |= static_cast<unsigned>(c - 'a' + 10);
      else if (c >= 'A' && c <= 'F') cp |= static_cast<unsigned>(c - 'A' + 10);
      else fail("bad \\u escape");
    }
    p_ += 4;
    // Encode as UTF-8 (basic plane only; surrogate pairs are not used by any
    // writer of this format).
    if (cp < 0x80) {
      scratch_ += static_cast<char>(cp);
    } else if (cp < 0x800) {
      scratch_ += static_cast<char>(0xc0 | (cp >> 6));
      scratch_ += static_cast<char>(0x80 | (cp & 0x3f));
    } else {
      scratch_ += static_cast<char>(0xe0 | (cp >> 12));
      scratch_ += static_cast<char>(0x80 | ((cp >> 6) & 0x3f));
      scratch_ += static_cast<char>(0x80 | (cp & 0x3f));
    }
  }

  std::int64_t parse_int() {
    skip_ws();
    std::int64_t v = 0;
    auto [next, ec] = std::from_chars(p_, end_, v);
    if (ec != std::errc{}) fail("expected integer");
    p_ = next;
    return v;
  }

  double parse_double() {
    skip_ws();
    double v = 0;
    auto [next, ec] = std::from_chars(p_, end_, v);
    if (ec != std::errc{}) fail("expected number");
    p_ = next;
    return v;
  }

  void skip_ws() {
    while (p_ != end_ && (*p_ == ' ' || *p_ == '\t')) ++p_;
  }

  void expect(char c) {
    skip_ws();
    if (p_ == end_ || *p_ != c) fail(std::string("expected '") + c + "'");
    ++p_;
  }

  bool try_consume(char c) {
    skip_ws();
    if (p_ != end_ && *p_ == c) {
      ++p_;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) { throw ParseError(0, msg); }

  const char* p_;
  const char* end_;
  std::string scratch_;
};

void append_json_string(std::string& out, std::string_view s) {
  out += '"';
  for (char c : s) {
    switch (c) {
      case '"': out += "\\\""; break;
      case '\\': out += "\\\\"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      case '\t': out += "\\t"; break;
      default:
        if (static_cast<unsigned char>(c) < 0x20) {
          char buf[8];
          std::snprintf(buf, sizeof buf, "\\u%04x", c);
          out += buf;
        } else {
          out += c;
        }
    }
  }
  out += '"';
}

void append_int(std::string& out, std::int64_t v) {
  char buf[24];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, p);
}

}  // namespace

Amount Transaction::input_total() const { return sum_amounts(inputs); }
Amount Transaction::output_total() const { return sum_amounts(outputs); }
Amount LedgerTx::input_total() const { return sum_amounts(inputs); }
Amount LedgerTx::output_total() const { return sum_amounts(outputs); }

ValidationResult validate_transaction(const Transaction& tx) {
  bool nonpositive = false;
  for (const auto& io : tx.inputs) nonpositive |= io.amount <= 0;
  for (const auto& io : tx.outputs) nonpositive |= io.amount <= 0;
  return check_amounts(tx.is_coinbase(), tx.input_total(), tx.output_total(),
                       nonpositive);
}

AddressIndex::AddressIndex(const AddressIndex& other) : names_(other.names_) {
  map_.reserve(names_.size());
  for (AddressId id = 0; id < names_.size(); ++id) {
    map_.emplace(names_[id], id);
  }
}

AddressIndex& AddressIndex::operator=(const AddressIndex& other) {
  if (this != &other) {
    AddressIndex copy(other);
    *this = std::move(copy);
  }
  return *this;
}

AddressId AddressIndex::intern(std::string_view name) {
  auto it = map_.find(name);
  if (it != map_.end()) return it->second;
  auto id = static_cast<AddressId>(names_.size());
  names_.emplace_back(name);
  map_.emplace(names_.back(), id);
  return id;
}

std::optional<AddressId> AddressIndex::find(std::string_view name) const {
  auto it = map_.find(name);
  if (it == map_.end()) return std::nullopt;
  return it->second;
}

namespace {

// Fixed-footprint membership prefilter for the streaming duplicate check.
class BloomFilter {
 public:
  BloomFilter() : words_(kWords, 0) {}

  // Returns true when the id was possibly seen before.
  bool test_and_set(std::uint64_t h1) {
    std::uint64_t h2 = mix64(h1 + 0x9e3779b97f4a7c15ULL);
    bool hit = set_bit(h1) & set_bit(h2);
    return hit;
  }

 private:
  static constexpr std::size_t kWords = 1u << 20;  // 8 MiB, 2^26 bits

  bool set_bit(std::uint64_t h) {
    std::uint64_t bit = h & (kWords * 64 - 1);
    std::uint64_t mask = 1ULL << (bit & 63);
    std::uint64_t& word = words_[bit >> 6];
    bool was = word & mask;
    word |= mask;
    return was;
  }

  std::vector<std::uint64_t> words_;
};

}  // namespace

std::size_t scan_jsonl(std::istream& in, AddressIndex& addrs,
                       const std::function<void(const LedgerTx&)>& fn,
                       const ScanOptions& opts) {
  std::string line;
  LedgerTx tx;
  std::size_t lineno = 0;
  std::size_t count = 0;
  // Fingerprint mode: a spurious 64-bit collision over a billion ids is less
  // likely than disk corruption. Ledger::load performs an exact check.
  std::unordered_set<std::uint64_t> seen_ids;
  std::unique_ptr<BloomFilter> bloom;
  if (opts.dup_check == ScanOptions::DupCheck::bloom) {
    if (!opts.flagged) {
      throw Error("bloom duplicate check requires a flagged-id sink");
    }
    bloom = std::make_unique<BloomFilter>();
  }
  Timestamp prev_ts = 0;
  std::string prev_id;

  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    tx.usd_rate.reset();
    try {
      LineParser parser(line.data(), line.data() + line.size());
      parser.parse_record(tx, addrs);
    } catch (const ParseError& e) {
      throw ParseError(lineno, e.what());
    }

    bool nonpositive = false;
    for (const auto& [a, amt] : tx.inputs) nonpositive |= amt <= 0;
    for (const auto& [a, amt] : tx.outputs) nonpositive |= amt <= 0;
    auto vr = check_amounts(tx.is_coinbase(), tx.input_total(),
                            tx.output_total(), nonpositive);
    if (!vr.ok()) {
      throw ValidationError("invalid transaction '" + tx.tx_id + "' at line " +
                            std::to_string(lineno) + ": " + vr.detail);
    }
    if (opts.dup_check == ScanOptions::DupCheck::fingerprint) {
      std::uint64_t fp = mix64(fnv1a64(tx.tx_id) ^ (tx.tx_id.size() << 1));
      if (!seen_ids.insert(fp).second) throw DuplicateTxId(tx.tx_id);
    } else if (bloom) {
      if (bloom->test_and_set(mix64(fnv1a64(tx.tx_id)))) {
        opts.flagged->push_back(tx.tx_id);
      }
    }
    if (opts.require_sorted && count > 0) {
      if (tx.timestamp < prev_ts ||
          (tx.timestamp == prev_ts && tx.tx_id <= prev_id)) {
        throw ValidationError("ledger not sorted by (timestamp, tx_id) at line " +
                              std::to_string(lineno));
      }
    }
    prev_ts = tx.timestamp;
    prev_id = tx.tx_id;
    ++count;
    fn(tx);
  }
  return count;
}

std::size_t scan_jsonl_file(const std::string& path, AddressIndex& addrs,
                            const std::function<void(const LedgerTx&)>& fn,
                            const ScanOptions& opts) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  return scan_jsonl(in, addrs, fn, opts);
}

void serialize_tx(const LedgerTx& tx, const AddressIndex& addrs, std::string& out) {
  out += "{\"tx_id\":";
  append_json_string(out, tx.tx_id);
  out += ",\"timestamp\":";
  append_int(out, tx.timestamp);
  out += ",\"inputs\":[";
  bool first = true;
  for (const auto& [addr, amount] : tx.inputs) {
    if (!first) out += ',';
    first = false;
    out += "{\"address\":";
    append_json_string(out, addrs.name(addr));
    out += ",\"amount\":";
    append_int(out, amount);
    out += '}';
  }
  out += "],\"outputs\":[";
  first = true;
  for (const auto& [addr, amount] : tx.outputs) {
    if (!first) out += ',';
    first = false;
    out += "{\"address\":";
    append_json_string(out, addrs.name(addr));
    out += ",\"amount\":";
    append_int(out, amount);
    out += '}';
  }
  out += ']';
  if (tx.usd_rate) {
    out += ",\"usd_rate\":";
    out += format_double(*tx.usd_rate);
  }
  out += "}\n";
}

Ledger Ledger::load(std::istream& in, LedgerFormat format) {
  (void)format;  // jsonl is the only wire format
  Ledger ledger;
  ScanOptions opts;
  opts.dup_check = ScanOptions::DupCheck::off;  // exact check below
  scan_jsonl(in, ledger.addrs_,
             [&](const LedgerTx& tx) { ledger.txs_.push_back(tx); }, opts);
  ledger.sort_and_check();
  return ledger;
}

Ledger Ledger::load_file(const std::string& path, LedgerFormat format) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  return load(in, format);
}

Ledger Ledger::from_transactions(std::vector<Transaction> txs) {
  Ledger ledger;
  for (const auto& src : txs) {
    auto vr = validate_transaction(src);
    if (!vr.ok()) {
      throw ValidationError("invalid transaction '" + src.tx_id + "': " + vr.detail);
    }
    if (src.tx_id.empty()) throw ValidationError("empty tx_id");
    LedgerTx tx;
    tx.tx_id = src.tx_id;
    tx.timestamp = src.timestamp;
    tx.usd_rate = src.usd_rate;
    tx.inputs.reserve(src.inputs.size());
    for (const auto& io : src.inputs) {
      tx.inputs.emplace_back(ledger.addrs_.intern(io.address), io.amount);
    }
    tx.outputs.reserve(src.outputs.size());
    for (const auto& io : src.outputs) {
      tx.outputs.emplace_back(ledger.addrs_.intern(io.address), io.amount);
    }
    ledger.txs_.push_back(std::move(tx));
  }
  ledger.sort_and_check();
  return ledger;
}

void Ledger::sort_and_check() {
  std::stable_sort(txs_.begin(), txs_.end(),
                   [](const LedgerTx& a, const LedgerTx& b) {
                     if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
                     return a.tx_id < b.tx_id;
                   });
  std::unordered_set<std::string_view> ids;
  ids.reserve(txs_.size());
  for (const auto& tx : txs_) {
    if (!ids.insert(tx.tx_id).second) throw DuplicateTxId(tx.tx_id);
  }
}

void Ledger::serialize(std::ostream& out) const {
  std::string buf;
  for (const auto& tx : txs_) {
    buf.clear();
    serialize_tx(tx, addrs_, buf);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  }
}

Timestamp Ledger::first_timestamp() const {
  if (txs_.empty()) throw EmptySeries();
  return txs_.front().timestamp;
}

Timestamp Ledger::last_timestamp() const {
  if (txs_.empty()) throw EmptySeries();
  return txs_.back().timestamp;
}

Ledger::Totals Ledger::totals() const {
  Totals t;
  for (const auto& tx : txs_) {
    Amount in = tx.input_total();
    Amount out = tx.output_total();
    t.total_in += in;
    t.total_out += out;
    if (tx.is_coinbase()) {
      t.coinbase_issued += out;
    } else {
      t.total_fees += in - out;
    }
  }
  return t;
}

void verify_flagged_duplicates(const std::string& path,
                               const std::vector<std::string>& flagged) {
  if (flagged.empty()) return;
  std::unordered_map<std::string_view, int> counts;
  for (const auto& id : flagged) counts.emplace(id, 0);
  AddressIndex scratch;
  ScanOptions opts;
  opts.dup_check = ScanOptions::DupCheck::off;
  scan_jsonl_file(path, scratch,
                  [&](const LedgerTx& tx) {
                    auto it = counts.find(std::string_view(tx.tx_id));
                    if (it != counts.end() && ++it->second > 1) {
                      throw DuplicateTxId(tx.tx_id);
                    }
                  },
                  opts);
}

}  // namespace dmflow
