#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "dmflow/errors.hpp"
#include "dmflow/ledger.hpp"
#include "dmflow/prices.hpp"
#include "dmflow/rng.hpp"
#include "test_util.hpp"

using namespace dmflow;
using dmflow::testing::make_tx;

TEST_CASE("validate_transaction accepts exact balance with zero fee") {
  auto tx = make_tx("t1", 0, {{"a", 3}}, {{"b", 2}, {"c", 1}});
  auto r = validate_transaction(tx);
  CHECK(r.ok());
  CHECK(tx.fee() == 0);
}

TEST_CASE("validate_transaction rejects outputs exceeding inputs") {
  auto tx = make_tx("t1", 0, {{"a", 1}}, {{"b", 2}});
  auto r = validate_transaction(tx);
  CHECK_FALSE(r.ok());
  CHECK(r.code == ValidationResult::Code::negative_fee);
}

TEST_CASE("validate_transaction accepts coinbase form") {
  auto tx = make_tx("t1", 0, {}, {{"b", 50}});
  CHECK(validate_transaction(tx).ok());
  CHECK(tx.is_coinbase());
}

TEST_CASE("validate_transaction rejects non-positive amounts") {
  auto tx = make_tx("t1", 0, {{"a", 5}}, {{"b", 0}, {"c", 5}});
  CHECK(validate_transaction(tx).code == ValidationResult::Code::zero_amount);
  auto tx2 = make_tx("t2", 0, {{"a", -1}}, {{"b", 1}});
  CHECK(validate_transaction(tx2).code == ValidationResult::Code::zero_amount);
}

TEST_CASE("load on empty stream gives empty ledger") {
  std::istringstream in("");
  auto ledger = Ledger::load(in);
  CHECK(ledger.empty());
}

TEST_CASE("load sorts shuffled records by (timestamp, tx_id)") {
  std::string lines =
      R"({"tx_id":"t3","timestamp":300,"inputs":[{"address":"a","amount":5}],"outputs":[{"address":"b","amount":5}]})"
      "\n"
      R"({"tx_id":"t1","timestamp":100,"inputs":[{"address":"a","amount":5}],"outputs":[{"address":"b","amount":5}]})"
      "\n"
      R"({"tx_id":"t2","timestamp":100,"inputs":[{"address":"a","amount":5}],"outputs":[{"address":"b","amount":5}]})"
      "\n";
  std::istringstream in(lines);
  auto ledger = Ledger::load(in);
  REQUIRE(ledger.size() == 3);
  CHECK(ledger.transactions()[0].tx_id == "t1");
  CHECK(ledger.transactions()[1].tx_id == "t2");
  CHECK(ledger.transactions()[2].tx_id == "t3");
}

TEST_CASE("malformed line reports its line number") {
  std::string lines =
      R"({"tx_id":"t1","timestamp":100,"inputs":[],"outputs":[{"address":"b","amount":5}]})"
      "\n"
      "{\"tx_id\": oops}\n";
  std::istringstream in(lines);
  try {
    Ledger::load(in);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line == 2);
  }
}

TEST_CASE("duplicate tx ids are a hard error") {
  std::string line =
      R"({"tx_id":"t1","timestamp":100,"inputs":[],"outputs":[{"address":"b","amount":5}]})"
      "\n";
  std::istringstream in(line + line);
  CHECK_THROWS_AS(Ledger::load(in), DuplicateTxId);
}

TEST_CASE("round-trip: serialize(load(x)) equals canonical form") {
  // Build a canonical ledger, then feed a shuffled, whitespace-padded
  // variant through load and compare serializations.
  Rng rng(77);
  std::vector<Transaction> txs;
  for (int i = 0; i < 200; ++i) {
    Transaction tx;
    tx.tx_id = "t" + std::to_string(1000 + i);
    tx.timestamp = 1000000 + static_cast<Timestamp>(rng.uniform_u64(5000));
    int n_in = static_cast<int>(rng.uniform_u64(3));
    for (int k = 0; k <= n_in; ++k) {
      tx.inputs.push_back({"a" + std::to_string(rng.uniform_u64(50)),
                           static_cast<Amount>(1 + rng.uniform_u64(1000))});
    }
    Amount total = tx.input_total();
    tx.outputs.push_back({"b" + std::to_string(rng.uniform_u64(50)), total});
    if (rng.bernoulli(0.3)) tx.usd_rate = 10.0 + rng.uniform_double() * 90.0;
    txs.push_back(std::move(tx));
  }
  auto canonical_ledger = Ledger::from_transactions(txs);
  std::ostringstream canonical;
  canonical_ledger.serialize(canonical);

  // Shuffle lines and add JSON whitespace noise.
  std::vector<std::string> lines;
  {
    std::istringstream in(canonical.str());
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
  }
  for (std::size_t i = lines.size(); i > 1; --i) {
    std::swap(lines[i - 1], lines[rng.uniform_u64(i)]);
  }
  std::string noisy;
  for (auto& line : lines) {
    std::string padded;
    for (char ch : line) {
      padded += ch;
      if (ch == ',' && rng.bernoulli(0.2)) padded += ' ';
    }
    noisy += padded + "\n";
  }
  std::istringstream in(noisy);
  auto reloaded = Ledger::load(in);
  std::ostringstream out;
  reloaded.serialize(out);
  CHECK(out.str() == canonical.str());
}

TEST_CASE("streaming scan matches in-memory load and stays in file order") {
  std::string lines =
      R"({"tx_id":"t1","timestamp":100,"inputs":[{"address":"a","amount":5}],"outputs":[{"address":"b","amount":4}]})"
      "\n"
      R"({"tx_id":"t2","timestamp":200,"inputs":[],"outputs":[{"address":"c","amount":50}]})"
      "\n";
  std::istringstream in(lines);
  AddressIndex addrs;
  std::vector<std::string> seen;
  ScanOptions opts;
  opts.require_sorted = true;
  auto n = scan_jsonl(in, addrs, [&](const LedgerTx& tx) { seen.push_back(tx.tx_id); },
                      opts);
  CHECK(n == 2);
  CHECK(seen == std::vector<std::string>{"t1", "t2"});
  CHECK(addrs.size() == 3);
}

TEST_CASE("scan rejects unsorted input when ordering is required") {
  std::string lines =
      R"({"tx_id":"t2","timestamp":200,"inputs":[],"outputs":[{"address":"c","amount":50}]})"
      "\n"
      R"({"tx_id":"t1","timestamp":100,"inputs":[],"outputs":[{"address":"c","amount":50}]})"
      "\n";
  std::istringstream in(lines);
  AddressIndex addrs;
  ScanOptions opts;
  opts.require_sorted = true;
  CHECK_THROWS_AS(scan_jsonl(in, addrs, [](const LedgerTx&) {}, opts),
                  ValidationError);
}

TEST_CASE("price lookup uses the latest date at or before the timestamp") {
  PriceSeries prices;
  Day d1 = parse_date("2020-01-01");
  Day d2 = parse_date("2020-01-05");
  prices.add(d1, 10.0);
  prices.add(d2, 20.0);

  CHECK(to_usd(2.0, day_start(d1), prices) == doctest::Approx(20.0));
  // Between d1 and d2 the step function still returns d1's rate.
  CHECK(to_usd(1.0, day_start(d1 + 2), prices) == doctest::Approx(10.0));
  CHECK(to_usd(1.0, day_start(d2) + 3600, prices) == doctest::Approx(20.0));
  CHECK_THROWS_AS(prices.rate_at(day_start(d1) - 1), OutOfRangeTimestamp);
  CHECK_THROWS_AS(prices.rate_at(day_start(d2 + 1)), OutOfRangeTimestamp);
}

TEST_CASE("to_usd equals scalar recomputation on randomized rows") {
  Rng rng(123);
  PriceSeries prices;
  std::vector<std::pair<Day, double>> rows;
  Day d = parse_date("2019-06-03");
  for (int i = 0; i < 60; ++i) {
    double rate = 50.0 + rng.uniform_double() * 150.0;
    prices.add(d, rate);
    rows.emplace_back(d, rate);
    d += static_cast<Day>(1 + rng.uniform_u64(3));
  }
  for (int i = 0; i < 500; ++i) {
    Day q = rows.front().first +
            static_cast<Day>(rng.uniform_u64(
                static_cast<std::uint64_t>(rows.back().first - rows.front().first)));
    Timestamp ts = day_start(q) + static_cast<Timestamp>(rng.uniform_u64(86400));
    auto amount = static_cast<Amount>(1 + rng.uniform_u64(5'000'000'000ULL));

    // Brute-force oracle: scan all rows for the latest date <= day.
    double expect_rate = 0;
    for (const auto& [date, rate] : rows) {
      if (date <= q) expect_rate = rate;
    }
    double expected =
        static_cast<double>(amount) / static_cast<double>(kUnitsPerCoin) * expect_rate;
    CHECK(to_usd(amount, ts, prices) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("ledger conservation: inputs equal outputs plus fees minus issuance") {
  std::vector<Transaction> txs;
  txs.push_back(make_tx("c1", 10, {}, {{"x", 1000}}));
  txs.push_back(make_tx("t1", 20, {{"x", 1000}}, {{"y", 600}, {"z", 390}}));
  txs.push_back(make_tx("t2", 30, {{"y", 600}}, {{"w", 600}}));
  auto ledger = Ledger::from_transactions(txs);
  auto t = ledger.totals();
  CHECK(t.coinbase_issued == 1000);
  CHECK(t.total_fees == 10);
  CHECK(t.total_in == t.total_out - t.coinbase_issued + t.total_fees);
}
