#pragma once

#include <chrono>
#include <string>
#include <string_view>

namespace calfront {

using Date = std::chrono::year_month_day;

Date make_date(int year, unsigned month, unsigned day);

/// Parses YYYY-MM-DD; throws ValidationError on anything else.
Date parse_iso_date(std::string_view text);
std::string format_iso_date(const Date& date);

/// Signed day count `to - from`.
long days_between(const Date& from, const Date& to);
Date add_days(const Date& date, long days);

int year_of(const Date& date);
unsigned month_of(const Date& date);
unsigned day_of(const Date& date);

std::string month_name(unsigned month);

}  // namespace calfront
