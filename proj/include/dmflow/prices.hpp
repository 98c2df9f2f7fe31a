#pragma once

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "dmflow/common.hpp"

namespace dmflow {

// Daily USD price step function: a timestamp resolves to the rate of the latest
// date at or before it. Dates are strictly increasing, rates positive.
class PriceSeries {
 public:
  void add(Day date, double usd_per_coin);

  static PriceSeries from_csv(std::istream& in);  // header: date,rate
  static PriceSeries from_csv_file(const std::string& path);
  void to_csv(std::ostream& out) const;

  bool empty() const { return rows_.empty(); }
  std::size_t size() const { return rows_.size(); }
  Day first_date() const;
  Day last_date() const;

  // Throws OutOfRangeTimestamp outside [first_date, last_date].
  double rate_at(Timestamp ts) const;

  double usd(Amount units, Timestamp ts) const {
    return static_cast<double>(units) / static_cast<double>(kUnitsPerCoin) *
           rate_at(ts);
  }

  const std::vector<std::pair<Day, double>>& rows() const { return rows_; }

 private:
  std::vector<std::pair<Day, double>> rows_;
};

double to_usd(double native_coins, Timestamp ts, const PriceSeries& prices);
double to_usd(Amount units, Timestamp ts, const PriceSeries& prices);

}  // namespace dmflow
