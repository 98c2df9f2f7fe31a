#include "dmflow/prices.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <ostream>

#include "dmflow/csv.hpp"
#include "dmflow/errors.hpp"

namespace dmflow {

void PriceSeries::add(Day date, double usd_per_coin) {
  if (usd_per_coin <= 0) {
    throw ValidationError("price rate must be > 0 on " + format_date(date));
  }
  if (!rows_.empty() && date <= rows_.back().first) {
    throw ValidationError("price dates must be strictly increasing at " +
                          format_date(date));
  }
  rows_.emplace_back(date, usd_per_coin);
}

PriceSeries PriceSeries::from_csv(std::istream& in) {
  PriceSeries series;
  auto rows = csv::read_rows(in, "date,rate");
  std::size_t lineno = 1;
  for (const auto& row : rows) {
    ++lineno;
    if (row.size() != 2) throw ParseError(lineno, "expected 2 columns");
    Day date = parse_date(row[0]);
    double rate = 0;
    auto [p, ec] = std::from_chars(row[1].data(), row[1].data() + row[1].size(), rate);
    if (ec != std::errc{} || p != row[1].data() + row[1].size()) {
      throw ParseError(lineno, "bad rate '" + row[1] + "'");
    }
    series.add(date, rate);
  }
  return series;
}

PriceSeries PriceSeries::from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  return from_csv(in);
}

void PriceSeries::to_csv(std::ostream& out) const {
  out << "date,rate\n";
  for (const auto& [date, rate] : rows_) {
    out << format_date(date) << ',' << format_double(rate) << '\n';
  }
}

Day PriceSeries::first_date() const {
  if (rows_.empty()) throw EmptySeries();
  return rows_.front().first;
}

Day PriceSeries::last_date() const {
  if (rows_.empty()) throw EmptySeries();
  return rows_.back().first;
}

double PriceSeries::rate_at(Timestamp ts) const {
  if (rows_.empty()) throw OutOfRangeTimestamp("empty price series");
  Day d = day_of(ts);
  if (d < rows_.front().first || d > rows_.back().first) {
    throw OutOfRangeTimestamp("timestamp " + std::to_string(ts) + " (" +
                              format_date(d) + ") outside price range [" +
                              format_date(rows_.front().first) + ", " +
                              format_date(rows_.back().first) + "]");
  }
  // Latest date <= d.
  auto it = std::upper_bound(rows_.begin(), rows_.end(), d,
                             [](Day lhs, const auto& row) { return lhs < row.first; });
  return std::prev(it)->second;
}

double to_usd(double native_coins, Timestamp ts, const PriceSeries& prices) {
  return native_coins * prices.rate_at(ts);
}

double to_usd(Amount units, Timestamp ts, const PriceSeries& prices) {
  return prices.usd(units, ts);
}

}  // namespace dmflow
