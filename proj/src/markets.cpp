#include "dmflow/markets.hpp"

#include <fstream>
#include <istream>
#include <ostream>

#include "dmflow/csv.hpp"
#include "dmflow/errors.hpp"

namespace dmflow {

std::string to_string(CloseReason r) {
  switch (r) {
    case CloseReason::raided: return "raided";
    case CloseReason::scam: return "scam";
    case CloseReason::voluntary: return "voluntary";
    case CloseReason::active: return "active";
  }
  return "active";
}

std::string to_string(MarketCategory c) {
  switch (c) {
    case MarketCategory::drugs: return "drugs";
    case MarketCategory::credits: return "credits";
    case MarketCategory::mixed: return "mixed";
  }
  return "mixed";
}

CloseReason close_reason_from_string(const std::string& s) {
  if (s == "raided") return CloseReason::raided;
  if (s == "scam") return CloseReason::scam;
  if (s == "voluntary") return CloseReason::voluntary;
  if (s == "active") return CloseReason::active;
  throw ValidationError("unknown closure reason '" + s + "'");
}

MarketCategory category_from_string(const std::string& s) {
  if (s == "drugs") return MarketCategory::drugs;
  if (s == "credits") return MarketCategory::credits;
  if (s == "mixed") return MarketCategory::mixed;
  throw ValidationError("unknown market category '" + s + "'");
}

void validate_roster(const std::vector<MarketInfo>& roster) {
  for (const auto& m : roster) {
    if (m.name.empty()) throw ValidationError("market with empty name");
    if (m.end && *m.end <= m.start) {
      throw ValidationError("market " + m.name + ": end date not after start");
    }
    if (m.end.has_value() == (m.reason == CloseReason::active)) {
      throw ValidationError("market " + m.name +
                            ": closure reason inconsistent with end date");
    }
  }
}

std::vector<MarketInfo> roster_from_csv(std::istream& in) {
  auto rows = csv::read_rows(in, "name,start_date,end_date,closure_reason,category");
  std::vector<MarketInfo> roster;
  std::size_t lineno = 1;
  for (const auto& row : rows) {
    ++lineno;
    if (row.size() != 5) throw ParseError(lineno, "expected 5 columns");
    MarketInfo m;
    m.name = row[0];
    m.start = parse_date(row[1]);
    if (!row[2].empty()) m.end = parse_date(row[2]);
    m.reason = close_reason_from_string(row[3]);
    m.category = category_from_string(row[4]);
    roster.push_back(std::move(m));
  }
  validate_roster(roster);
  return roster;
}

std::vector<MarketInfo> roster_from_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingInput(path);
  return roster_from_csv(in);
}

void roster_to_csv(std::ostream& out, const std::vector<MarketInfo>& roster) {
  out << "name,start_date,end_date,closure_reason,category\n";
  for (const auto& m : roster) {
    csv::write_row(out, {m.name, format_date(m.start),
                         m.end ? format_date(*m.end) : std::string{},
                         to_string(m.reason), to_string(m.category)});
  }
}

namespace {

MarketInfo make_market(const char* name, const char* start, const char* end,
                       CloseReason reason, MarketCategory category) {
  MarketInfo m;
  m.name = name;
  m.start = parse_date(start);
  if (end) m.end = parse_date(end);
  m.reason = reason;
  m.category = category;
  return m;
}

std::vector<MarketInfo> build_reference_roster() {
  using R = CloseReason;
  using C = MarketCategory;
  std::vector<MarketInfo> roster;
  roster.push_back(make_market("Abraxas Market", "2014-12-13", "2015-11-05", R::scam, C::drugs));
  roster.push_back(make_market("Acropolis Market", "2016-03-27", "2017-07-01", R::voluntary, C::mixed));
  roster.push_back(make_market("Agora Market", "2013-12-03", "2015-08-26", R::voluntary, C::mixed));
  roster.push_back(make_market("AlphaBay Market", "2014-12-22", "2017-07-05", R::raided, C::mixed));
  roster.push_back(make_market("Apollon Market", "2018-05-03", nullptr, R::active, C::drugs));
  roster.push_back(make_market("Babylon Market", "2014-07-11", "2015-07-31", R::raided, C::drugs));
  roster.push_back(make_market("Berlusconi Market", "2018-08-12", nullptr, R::active, C::mixed));
  roster.push_back(make_market("Bilzerian24.net", "2017-11-13", nullptr, R::active, C::credits));
  roster.push_back(make_market("Black Bank Market", "2014-02-05", "2015-05-18", R::scam, C::mixed));
  roster.push_back(make_market("Blue Sky Marketplace", "2013-12-03", "2014-11-05", R::raided, C::drugs));
  roster.push_back(make_market("Dream Market", "2016-03-19", "2019-04-30", R::voluntary, C::mixed));
  roster.push_back(make_market("East India Company Market", "2015-04-28", "2016-01-01", R::scam, C::drugs));
  roster.push_back(make_market("Empire Market", "2018-02-01", nullptr, R::active, C::mixed));
  roster.push_back(make_market("Evolution Market", "2014-01-14", "2015-03-14", R::scam, C::drugs));
  roster.push_back(make_market("German Plaza Market", "2015-05-22", "2016-05-01", R::scam, C::mixed));
  roster.push_back(make_market("Hansa Market", "2014-03-09", "2017-07-20", R::raided, C::drugs));
  roster.push_back(make_market("House of Lions Market", "2016-05-23", "2017-07-12", R::raided, C::drugs));
  roster.push_back(make_market("Hydra Marketplace", "2015-11-25", nullptr, R::active, C::mixed));
  roster.push_back(make_market("Middle Earth Marketplace", "2014-06-22", "2015-11-04", R::scam, C::mixed));
  roster.push_back(make_market("Nucleus Market", "2014-10-24", "2016-04-13", R::scam, C::mixed));
  roster.push_back(make_market("Olympus Market", "2018-04-20", "2018-09-04", R::scam, C::mixed));
  roster.push_back(make_market("Oxygen Market", "2015-04-16", "2015-08-27", R::scam, C::drugs));
  roster.push_back(make_market("Pandora OpenMarket", "2013-10-20", "2014-11-05", R::raided, C::drugs));
  roster.push_back(make_market("Russian Anonymous Marketplace", "2014-08-29", "2017-09-21", R::raided, C::mixed));
  roster.push_back(make_market("Sheep Marketplace", "2013-02-28", "2013-11-29", R::scam, C::drugs));
  roster.push_back(make_market("Silk Road Marketplace", "2011-01-31", "2013-10-02", R::raided, C::mixed));
  roster.push_back(make_market("Silk Road 2 Market", "2013-11-06", "2014-11-05", R::raided, C::mixed));
  roster.push_back(make_market("Silk Road 3.1", "2018-01-21", nullptr, R::active, C::drugs));
  roster.push_back(make_market("TradeRoute Market", "2016-11-06", "2017-10-12", R::scam, C::mixed));
  roster.push_back(make_market("Unicc", "2015-01-30", nullptr, R::active, C::credits));
  roster.push_back(make_market("Wall Street Market", "2016-09-09", "2019-05-02", R::raided, C::mixed));
  validate_roster(roster);
  return roster;
}

}  // namespace

const std::vector<MarketInfo>& reference_roster() {
  static const std::vector<MarketInfo> roster = build_reference_roster();
  return roster;
}

const std::vector<std::string>& reference_russian_markets() {
  static const std::vector<std::string> names = {"Hydra Marketplace",
                                                 "Russian Anonymous Marketplace"};
  return names;
}

}  // namespace dmflow
