#include "dmflow/common.hpp"

#include <array>
#include <cstdio>

#include "dmflow/errors.hpp"

namespace dmflow {

namespace {

namespace chr = std::chrono;

chr::sys_days to_sys_days(Day d) {
  return chr::sys_days{chr::days{d}};
}

}  // namespace

Day parse_date(std::string_view text) {
  int y = 0, m = 0, d = 0;
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') {
    throw ParseError(0, "bad date '" + std::string(text) + "' (want YYYY-MM-DD)");
  }
  auto num = [&](std::size_t off, std::size_t len, int& out) {
    auto [p, ec] = std::from_chars(text.data() + off, text.data() + off + len, out);
    return ec == std::errc{} && p == text.data() + off + len;
  };
  if (!num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d)) {
    throw ParseError(0, "bad date '" + std::string(text) + "'");
  }
  chr::year_month_day ymd{chr::year{y}, chr::month{static_cast<unsigned>(m)},
                          chr::day{static_cast<unsigned>(d)}};
  if (!ymd.ok()) {
    throw ParseError(0, "invalid calendar date '" + std::string(text) + "'");
  }
  return static_cast<Day>(chr::sys_days{ymd}.time_since_epoch().count());
}

std::string format_date(Day d) {
  chr::year_month_day ymd{to_sys_days(d)};
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02d", static_cast<int>(ymd.year()),
                static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()));
  return buf;
}

int weekday_of(Day d) {
  chr::weekday wd{to_sys_days(d)};
  return static_cast<int>(wd.iso_encoding()) - 1;  // Monday = 0
}

std::string format_double(double v) {
  std::array<char, 32> buf;
  auto [p, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), p);
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dmflow
