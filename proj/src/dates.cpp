#include "gordonvar/dates.hpp"

#include <charconv>
#include <cstdio>

#include "gordonvar/errors.hpp"

namespace gordonvar {

namespace {

bool leap(int y) { return (y % 4 == 0 && y % 100 != 0) || y % 400 == 0; }

int days_in_month(int y, int m) {
  static const int lengths[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
  if (m == 2 && leap(y)) return 29;
  return lengths[m - 1];
}

// Civil <-> serial day conversions (days since 1970-01-01), the usual
// Gregorian shift-by-March construction.
long to_serial(const Date& d) {
  long y = d.year - (d.month <= 2);
  long era = (y >= 0 ? y : y - 399) / 400;
  unsigned yoe = static_cast<unsigned>(y - era * 400);
  unsigned doy = (153u * (d.month + (d.month > 2 ? -3 : 9)) + 2) / 5 + d.day - 1;
  unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<long>(doe) - 719468;
}

Date from_serial(long z) {
  z += 719468;
  long era = (z >= 0 ? z : z - 146096) / 146097;
  unsigned doe = static_cast<unsigned>(z - era * 146097);
  unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  long y = static_cast<long>(yoe) + era * 400;
  unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  unsigned mp = (5 * doy + 2) / 153;
  unsigned day = doy - (153 * mp + 2) / 5 + 1;
  unsigned month = mp + (mp < 10 ? 3 : -9);
  return Date{static_cast<int>(y + (month <= 2)), static_cast<int>(month),
              static_cast<int>(day)};
}

Date add_months(const Date& d, int months) {
  bool was_month_end = d.day == days_in_month(d.year, d.month);
  int idx = d.year * 12 + (d.month - 1) + months;
  int year = idx / 12;
  int month = idx % 12 + 1;
  int last = days_in_month(year, month);
  int day = was_month_end ? last : std::min(d.day, last);
  return Date{year, month, day};
}

}  // namespace

Frequency parse_frequency(const std::string& name) {
  if (name == "daily") return Frequency::daily;
  if (name == "weekly") return Frequency::weekly;
  if (name == "monthly") return Frequency::monthly;
  if (name == "quarterly") return Frequency::quarterly;
  if (name == "annual") return Frequency::annual;
  fail(errc::bad_argument, "unknown frequency '" + name + "'");
}

std::string to_string(Frequency f) {
  switch (f) {
    case Frequency::daily: return "daily";
    case Frequency::weekly: return "weekly";
    case Frequency::monthly: return "monthly";
    case Frequency::quarterly: return "quarterly";
    case Frequency::annual: return "annual";
  }
  return "monthly";
}

Date parse_date(const std::string& iso) {
  auto bad = [&]() -> Date {
    fail(errc::bad_argument, "malformed date '" + iso + "', expected YYYY-MM-DD");
  };
  if (iso.size() != 10 || iso[4] != '-' || iso[7] != '-') return bad();
  Date d;
  auto parse_int = [&](int from, int to, int& out) {
    auto res = std::from_chars(iso.data() + from, iso.data() + to, out);
    return res.ec == std::errc{} && res.ptr == iso.data() + to;
  };
  if (!parse_int(0, 4, d.year) || !parse_int(5, 7, d.month) || !parse_int(8, 10, d.day))
    return bad();
  if (d.month < 1 || d.month > 12 || d.day < 1 || d.day > days_in_month(d.year, d.month))
    return bad();
  return d;
}

std::string to_string(const Date& d) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%04d-%02d-%02d", d.year, d.month, d.day);
  return buf;
}

Date advance(const Date& d, Frequency f) {
  switch (f) {
    case Frequency::daily: return from_serial(to_serial(d) + 1);
    case Frequency::weekly: return from_serial(to_serial(d) + 7);
    case Frequency::monthly: return add_months(d, 1);
    case Frequency::quarterly: return add_months(d, 3);
    case Frequency::annual: return add_months(d, 12);
  }
  return d;
}

}  // namespace gordonvar
