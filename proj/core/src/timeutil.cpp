#include "restlog/timeutil.hpp"

#include <array>
#include <charconv>
#include <cstdio>

namespace restlog {

std::int64_t days_from_civil(int year, unsigned month, unsigned day) {
  // Howard Hinnant's algorithm.
  year -= month <= 2 ? 1 : 0;
  const std::int64_t era = (year >= 0 ? year : year - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(year - era * 400);
  const unsigned doy = (153 * (month + (month > 2 ? -3 : 9)) + 2) / 5 + day - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

namespace {

struct Civil {
  int year;
  unsigned month, day, hour, minute, second, milli;
};

Civil civil_from_ms(EpochMs t) {
  std::int64_t days = t >= 0 ? t / 86400000 : -((-t + 86399999) / 86400000);
  std::int64_t rem = t - days * 86400000;
  Civil c{};
  c.hour = static_cast<unsigned>(rem / 3600000);
  c.minute = static_cast<unsigned>(rem / 60000 % 60);
  c.second = static_cast<unsigned>(rem / 1000 % 60);
  c.milli = static_cast<unsigned>(rem % 1000);
  days += 719468;
  const std::int64_t era = (days >= 0 ? days : days - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(days - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  c.day = doy - (153 * mp + 2) / 5 + 1;
  c.month = mp < 10 ? mp + 3 : mp - 9;
  c.year = static_cast<int>(yoe + era * 400 + (c.month <= 2 ? 1 : 0));
  return c;
}

constexpr std::array<std::string_view, 12> kMonths = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                                       "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};

bool read_uint(std::string_view s, std::size_t pos, std::size_t len, unsigned& out) {
  if (pos + len > s.size()) return false;
  for (std::size_t i = pos; i < pos + len; ++i) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  auto r = std::from_chars(s.data() + pos, s.data() + pos + len, out);
  return r.ec == std::errc{};
}

bool valid_date(int year, unsigned month, unsigned day) {
  static constexpr unsigned kDays[] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (month < 1 || month > 12 || day < 1) return false;
  bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
  unsigned limit = kDays[month - 1] + (month == 2 && leap ? 1 : 0);
  return day <= limit;
}

std::optional<EpochMs> assemble(int year, unsigned month, unsigned day, unsigned h, unsigned m,
                                unsigned s, unsigned ms, int offset_minutes) {
  if (!valid_date(year, month, day) || h > 23 || m > 59 || s > 60) return std::nullopt;
  std::int64_t secs = days_from_civil(year, month, day) * 86400 + h * 3600 + m * 60 + s;
  secs -= static_cast<std::int64_t>(offset_minutes) * 60;
  return secs * 1000 + ms;
}

}  // namespace

std::optional<EpochMs> parse_nginx_time(std::string_view s) {
  // dd/Mon/yyyy:HH:MM:SS +hhmm
  if (s.size() != 26 || s[2] != '/' || s[6] != '/' || s[11] != ':' || s[14] != ':' ||
      s[17] != ':' || s[20] != ' ' || (s[21] != '+' && s[21] != '-')) {
    return std::nullopt;
  }
  unsigned day, year, h, m, sec, oh, om;
  if (!read_uint(s, 0, 2, day) || !read_uint(s, 7, 4, year) || !read_uint(s, 12, 2, h) ||
      !read_uint(s, 15, 2, m) || !read_uint(s, 18, 2, sec) || !read_uint(s, 22, 2, oh) ||
      !read_uint(s, 24, 2, om)) {
    return std::nullopt;
  }
  unsigned month = 0;
  for (std::size_t i = 0; i < kMonths.size(); ++i) {
    if (s.substr(3, 3) == kMonths[i]) month = static_cast<unsigned>(i + 1);
  }
  if (month == 0) return std::nullopt;
  int offset = static_cast<int>(oh * 60 + om) * (s[21] == '-' ? -1 : 1);
  return assemble(static_cast<int>(year), month, day, h, m, sec, 0, offset);
}

std::optional<EpochMs> parse_iso8601(std::string_view s) {
  unsigned year, month, day, h, m, sec;
  if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') ||
      s[13] != ':' || s[16] != ':') {
    return std::nullopt;
  }
  if (!read_uint(s, 0, 4, year) || !read_uint(s, 5, 2, month) || !read_uint(s, 8, 2, day) ||
      !read_uint(s, 11, 2, h) || !read_uint(s, 14, 2, m) || !read_uint(s, 17, 2, sec)) {
    return std::nullopt;
  }
  std::size_t pos = 19;
  unsigned ms = 0;
  if (pos < s.size() && s[pos] == '.') {
    ++pos;
    std::size_t digits = 0;
    unsigned scale = 100;
    while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
      if (digits < 3) ms += static_cast<unsigned>(s[pos] - '0') * scale;
      scale /= 10;
      ++digits;
      ++pos;
    }
    if (digits == 0) return std::nullopt;
  }
  int offset = 0;
  if (pos < s.size()) {
    if (s[pos] == 'Z' || s[pos] == 'z') {
      ++pos;
    } else if (s[pos] == '+' || s[pos] == '-') {
      int sign = s[pos] == '-' ? -1 : 1;
      unsigned oh, om;
      if (!read_uint(s, pos + 1, 2, oh)) return std::nullopt;
      std::size_t mpos = pos + 3;
      if (mpos < s.size() && s[mpos] == ':') ++mpos;
      if (!read_uint(s, mpos, 2, om)) return std::nullopt;
      offset = sign * static_cast<int>(oh * 60 + om);
      pos = mpos + 2;
    } else {
      return std::nullopt;
    }
  }
  if (pos != s.size()) return std::nullopt;
  return assemble(static_cast<int>(year), month, day, h, m, sec, ms, offset);
}

std::string format_nginx_time(EpochMs t) {
  Civil c = civil_from_ms(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%02u/%s/%04d:%02u:%02u:%02u +0000", c.day,
                kMonths[c.month - 1].data(), c.year, c.hour, c.minute, c.second);
  return buf;
}

std::string format_iso8601(EpochMs t) {
  Civil c = civil_from_ms(t);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02u-%02uT%02u:%02u:%02u.%03uZ", c.year, c.month, c.day,
                c.hour, c.minute, c.second, c.milli);
  return buf;
}

}  // namespace restlog
