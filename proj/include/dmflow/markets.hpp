#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "dmflow/common.hpp"

namespace dmflow {

enum class CloseReason { raided, scam, voluntary, active };
enum class MarketCategory { drugs, credits, mixed };

std::string to_string(CloseReason r);
std::string to_string(MarketCategory c);
CloseReason close_reason_from_string(const std::string& s);
MarketCategory category_from_string(const std::string& s);

struct MarketInfo {
  std::string name;
  Day start = 0;
  std::optional<Day> end;  // absent while the market is active
  CloseReason reason = CloseReason::active;
  MarketCategory category = MarketCategory::mixed;

  bool closed() const { return end.has_value(); }

  // Operating interval is [start, end): the end date is the first dark day.
  bool active_on(Day d) const { return d >= start && (!end || d < *end); }
};

// Throws ValidationError on a roster violating the interval/reason invariants.
void validate_roster(const std::vector<MarketInfo>& roster);

// CSV with header: name,start_date,end_date,closure_reason,category
// (end_date empty for active markets).
std::vector<MarketInfo> roster_from_csv(std::istream& in);
std::vector<MarketInfo> roster_from_csv_file(const std::string& path);
void roster_to_csv(std::ostream& out, const std::vector<MarketInfo>& roster);

// Built-in roster of 31 historical dark markets (June 2011 - July 2019
// observation window) with documented lifetimes and closure reasons.
const std::vector<MarketInfo>& reference_roster();

// Default exclusion set used by ranking variants that drop Russian-language
// markets. Callers may override via configuration.
const std::vector<std::string>& reference_russian_markets();

}  // namespace dmflow
