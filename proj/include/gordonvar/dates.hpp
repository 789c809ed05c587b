#pragma once

#include <compare>
#include <string>

namespace gordonvar {

enum class Frequency { daily, weekly, monthly, quarterly, annual };

Frequency parse_frequency(const std::string& name);
std::string to_string(Frequency f);

// Plain calendar date. Panels live on a regular grid at a declared frequency;
// consecutive rows must be exactly one grid step apart.
struct Date {
  int year = 1970;
  int month = 1;
  int day = 1;

  auto operator<=>(const Date&) const = default;
};

Date parse_date(const std::string& iso);  // "YYYY-MM-DD"
std::string to_string(const Date& d);

// Next grid point. Month-based frequencies keep the day-of-month, snapping to
// the month end when the anchor day does not exist (or was itself a month end).
Date advance(const Date& d, Frequency f);

}  // namespace gordonvar
