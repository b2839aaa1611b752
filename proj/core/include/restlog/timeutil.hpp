#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace restlog {

// Milliseconds since the Unix epoch, UTC.
using EpochMs = std::int64_t;

// Days since 1970-01-01 for a proleptic Gregorian date.
std::int64_t days_from_civil(int year, unsigned month, unsigned day);

// "10/Oct/2025:13:55:36 +0200" (nginx $time_local).
std::optional<EpochMs> parse_nginx_time(std::string_view text);
// "2025-10-10T13:55:36Z", "2025-10-10T13:55:36.123+02:00", "2025-10-10 13:55:36".
// A missing zone designator means UTC.
std::optional<EpochMs> parse_iso8601(std::string_view text);

std::string format_nginx_time(EpochMs t);      // always "+0000"
std::string format_iso8601(EpochMs t);         // "YYYY-MM-DDTHH:MM:SS.mmmZ"

}  // namespace restlog
