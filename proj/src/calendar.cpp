#include "calfront/calendar.hpp"

#include <array>
#include <charconv>
#include <cstdio>

#include "calfront/errors.hpp"

namespace calfront {

using namespace std::chrono;

Date make_date(int y, unsigned m, unsigned d) {
  Date date{year{y}, month{m}, day{d}};
  if (!date.ok()) throw ValidationError("invalid calendar date " + std::to_string(y) + "-" + std::to_string(m) + "-" + std::to_string(d));
  return date;
}

Date parse_iso_date(std::string_view text) {
  auto bad = [&] { return ValidationError("malformed ISO-8601 date '" + std::string(text) + "'"); };
  if (text.size() != 10 || text[4] != '-' || text[7] != '-') throw bad();
  int y = 0;
  unsigned m = 0;
  unsigned d = 0;
  auto parse = [&](std::string_view part, auto& out) {
    auto [ptr, ec] = std::from_chars(part.data(), part.data() + part.size(), out);
    if (ec != std::errc{} || ptr != part.data() + part.size()) throw bad();
  };
  parse(text.substr(0, 4), y);
  parse(text.substr(5, 2), m);
  parse(text.substr(8, 2), d);
  Date date{year{y}, month{m}, day{d}};
  if (!date.ok()) throw bad();
  return date;
}

std::string format_iso_date(const Date& date) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", int(date.year()), unsigned(date.month()), unsigned(date.day()));
  return buf;
}

long days_between(const Date& from, const Date& to) {
  return static_cast<long>((sys_days{to} - sys_days{from}).count());
}

Date add_days(const Date& date, long n) { return Date{sys_days{date} + days{n}}; }

int year_of(const Date& date) { return int(date.year()); }
unsigned month_of(const Date& date) { return unsigned(date.month()); }
unsigned day_of(const Date& date) { return unsigned(date.day()); }

std::string month_name(unsigned m) {
  static constexpr std::array<const char*, 12> kNames = {"January", "February", "March",     "April",   "May",      "June",
                                                         "July",    "August",   "September", "October", "November", "December"};
  if (m < 1 || m > 12) return "month " + std::to_string(m);
  return kNames[m - 1];
}

}  // namespace calfront
