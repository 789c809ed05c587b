#include "gordonvar/panel.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

#include "gordonvar/errors.hpp"

namespace gordonvar {

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

// Raw table: header plus string cells, trailing \r stripped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_file, "cannot open '" + path + "'");
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split_csv_line(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        fail(errc::bad_file, "'" + path + "': row with " +
                                 std::to_string(cells.size()) + " cells, header has " +
                                 std::to_string(table.header.size()));
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) fail(errc::bad_file, "'" + path + "' is empty");
  return table;
}

int column_index(const CsvTable& table, const std::string& name, const std::string& path) {
  auto it = std::find(table.header.begin(), table.header.end(), name);
  if (it == table.header.end())
    fail(errc::missing_column, "'" + path + "' has no column '" + name + "'");
  return static_cast<int>(it - table.header.begin());
}

double parse_number(const std::string& cell, const std::string& path) {
  double value = 0.0;
  auto res = std::from_chars(cell.data(), cell.data() + cell.size(), value);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    fail(errc::bad_file, "'" + path + "': unparseable number '" + cell + "'");
  return value;
}

void check_grid(const std::vector<Date>& dates, Frequency f, const std::string& what) {
  for (size_t t = 1; t < dates.size(); ++t) {
    if (dates[t] != advance(dates[t - 1], f))
      fail(errc::frequency_gap, what + ": expected " +
                                    to_string(advance(dates[t - 1], f)) + " after " +
                                    to_string(dates[t - 1]) + ", found " +
                                    to_string(dates[t]));
  }
}

}  // namespace

void CompanyPanel::validate() const {
  const int rows = static_cast<int>(dates.size());
  const int m = company_count();
  if (rows < 2) fail(errc::insufficient_data, "panel needs at least two dates");
  if (m < 1) fail(errc::insufficient_data, "panel has no companies");
  if (prices.rows() != rows || prices.cols() != m || dividends.rows() != rows ||
      dividends.cols() != m)
    fail(errc::length_mismatch, "panel matrices do not match the date/company grid");
  if (macro.rows() != rows && macro_count() > 0)
    fail(errc::length_mismatch, "macro matrix does not match the date grid");
  if (macro.cols() != macro_count())
    fail(errc::length_mismatch, "macro ids and macro columns disagree");
  check_grid(dates, frequency, "panel dates");
  for (int t = 0; t < rows; ++t)
    for (int i = 0; i < m; ++i) {
      if (!(prices(t, i) > 0.0))
        fail(errc::non_positive_price, "price for " + companies[i] + " at " +
                                           to_string(dates[t]) + " is not positive");
      if (!(dividends(t, i) > 0.0))
        fail(errc::non_positive_dividend, "dividend for " + companies[i] + " at " +
                                              to_string(dates[t]) + " is not positive");
    }
}

CompanyPanel load_panel(const std::string& csv_path, const PanelSchema& schema,
                        const std::string& macro_csv_path) {
  CsvTable table = read_csv(csv_path);
  const int c_date = column_index(table, schema.date_column, csv_path);
  const int c_comp = column_index(table, schema.company_column, csv_path);
  const int c_price = column_index(table, schema.price_column, csv_path);
  const int c_div = column_index(table, schema.dividend_column, csv_path);

  struct Cell {
    double price;
    double dividend;
  };
  std::map<Date, std::map<std::string, Cell>> grid;
  for (const auto& row : table.rows) {
    Date d = parse_date(row[c_date]);
    const std::string& name = row[c_comp];
    double price = parse_number(row[c_price], csv_path);
    double dividend = parse_number(row[c_div], csv_path);
    if (!(price > 0.0))
      fail(errc::non_positive_price,
           "price for " + name + " at " + to_string(d) + " is not positive");
    if (!(dividend > 0.0))
      fail(errc::non_positive_dividend,
           "dividend for " + name + " at " + to_string(d) + " is not positive");
    auto [it, inserted] = grid[d].emplace(name, Cell{price, dividend});
    if (!inserted)
      fail(errc::duplicate_date, name + " appears twice on " + to_string(d));
  }

  CompanyPanel panel;
  panel.frequency = schema.frequency;
  for (const auto& [date, _] : grid) panel.dates.push_back(date);
  check_grid(panel.dates, panel.frequency, "'" + csv_path + "'");

  std::map<std::string, int> company_index;
  for (const auto& [_, by_company] : grid)
    for (const auto& [name, __] : by_company) company_index.emplace(name, 0);
  for (auto& [name, idx] : company_index) {
    idx = static_cast<int>(panel.companies.size());
    panel.companies.push_back(name);
  }

  const int rows = static_cast<int>(panel.dates.size());
  const int m = panel.company_count();
  panel.prices.resize(rows, m);
  panel.dividends.resize(rows, m);
  panel.macro.resize(rows, 0);
  for (int t = 0; t < rows; ++t) {
    const auto& by_company = grid[panel.dates[t]];
    for (const auto& [name, idx] : company_index) {
      auto it = by_company.find(name);
      if (it == by_company.end())
        fail(errc::frequency_gap,
             name + " has no row on " + to_string(panel.dates[t]));
      panel.prices(t, idx) = it->second.price;
      panel.dividends(t, idx) = it->second.dividend;
    }
  }

  if (!macro_csv_path.empty()) {
    CsvTable mt = read_csv(macro_csv_path);
    const int m_date = column_index(mt, schema.date_column, macro_csv_path);
    for (size_t c = 0; c < mt.header.size(); ++c)
      if (static_cast<int>(c) != m_date) panel.macro_ids.push_back(mt.header[c]);
    std::map<Date, std::vector<double>> macro_rows;
    for (const auto& row : mt.rows) {
      Date d = parse_date(row[m_date]);
      std::vector<double> values;
      for (size_t c = 0; c < row.size(); ++c)
        if (static_cast<int>(c) != m_date)
          values.push_back(parse_number(row[c], macro_csv_path));
      if (!macro_rows.emplace(d, std::move(values)).second)
        fail(errc::duplicate_date,
             "'" + macro_csv_path + "' repeats " + to_string(d));
    }
    panel.macro.resize(rows, panel.macro_count());
    for (int t = 0; t < rows; ++t) {
      auto it = macro_rows.find(panel.dates[t]);
      if (it == macro_rows.end())
        fail(errc::frequency_gap, "'" + macro_csv_path + "' has no row on " +
                                      to_string(panel.dates[t]));
      for (int c = 0; c < panel.macro_count(); ++c) panel.macro(t, c) = it->second[c];
    }
  }

  panel.validate();
  return panel;
}

void RatePanel::validate() const {
  const int T = static_cast<int>(dates.size());
  const int m = static_cast<int>(log_required.cols());
  if (log_required.rows() != T || log_growth.rows() != T || log_growth.cols() != m ||
      raw_required.rows() != T || raw_growth.rows() != T ||
      log_dividends.rows() != T + 1 || log_dividends.cols() != m)
    fail(errc::length_mismatch, "rate panel blocks disagree on T or m");
  if (!log_required.allFinite() || !log_growth.allFinite() || !log_dividends.allFinite())
    fail(errc::bad_file, "rate panel contains non-finite entries");
}

RatePanel compute_rates(const CompanyPanel& panel) {
  panel.validate();
  const int T = panel.periods();
  const int m = panel.company_count();
  RatePanel rates;
  rates.dates.assign(panel.dates.begin() + 1, panel.dates.end());
  rates.log_required.resize(T, m);
  rates.log_growth.resize(T, m);
  rates.raw_required.resize(T, m);
  rates.raw_growth.resize(T, m);
  rates.log_dividends = panel.dividends.array().log().matrix();
  for (int t = 1; t <= T; ++t)
    for (int i = 0; i < m; ++i) {
      rates.log_required(t - 1, i) =
          std::log((panel.prices(t, i) + panel.dividends(t, i)) / panel.prices(t - 1, i));
      rates.log_growth(t - 1, i) =
          rates.log_dividends(t, i) - rates.log_dividends(t - 1, i);
    }
  rates.raw_required = rates.log_required.array().exp() - 1.0;
  rates.raw_growth = rates.log_growth.array().exp() - 1.0;
  rates.validate();
  return rates;
}

VarInput assemble_var_input(const RatePanel& rates, const Eigen::MatrixXd& macro) {
  const int T = static_cast<int>(rates.log_required.rows());
  const int m = static_cast<int>(rates.log_required.cols());
  const int ell = static_cast<int>(macro.cols());
  if (ell > 0 && macro.rows() != T)
    fail(errc::length_mismatch, "macro block has " + std::to_string(macro.rows()) +
                                    " rows, rates have " + std::to_string(T));
  VarInput input;
  input.m = m;
  input.ell = ell;
  input.data.resize(T, 2 * m + ell);
  input.data.leftCols(m) = rates.log_required;
  input.data.middleCols(m, m) = rates.log_growth;
  if (ell > 0) input.data.rightCols(ell) = macro;
  return input;
}

VarInput assemble_var_input(const RatePanel& rates, const CompanyPanel& panel) {
  const int T = static_cast<int>(rates.log_required.rows());
  if (panel.macro_count() == 0)
    return assemble_var_input(rates, Eigen::MatrixXd(T, 0));
  return assemble_var_input(rates, panel.macro.bottomRows(T));
}

}  // namespace gordonvar
