#pragma once

#include <charconv>
#include <chrono>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace dmflow {

// Native amounts are integer minimal units; 1 coin = 100'000'000 units.
using Amount = std::int64_t;
inline constexpr Amount kUnitsPerCoin = 100'000'000;

// UTC seconds since the Unix epoch.
using Timestamp = std::int64_t;
inline constexpr Timestamp kSecondsPerDay = 86'400;

// UTC days since the Unix epoch.
using Day = std::int32_t;

using AddressId = std::uint32_t;
using EntityId = std::uint32_t;

inline constexpr AddressId kNoAddress = ~AddressId{0};
inline constexpr EntityId kNoEntity = ~EntityId{0};

inline Day day_of(Timestamp ts) {
  // Floor division; timestamps before the epoch round toward earlier days.
  return static_cast<Day>(ts >= 0 ? ts / kSecondsPerDay
                                  : (ts - kSecondsPerDay + 1) / kSecondsPerDay);
}

inline Timestamp day_start(Day d) {
  return static_cast<Timestamp>(d) * kSecondsPerDay;
}

Day parse_date(std::string_view text);      // "YYYY-MM-DD"
std::string format_date(Day d);             // "YYYY-MM-DD"
int weekday_of(Day d);                      // 0 = Monday ... 6 = Sunday

inline Day monday_on_or_before(Day d) { return d - weekday_of(d); }

// Shortest round-trip decimal representation.
std::string format_double(double v);

// FNV-1a, used for stable config hashes in reports.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace dmflow
