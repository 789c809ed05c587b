#pragma once

#include <Eigen/Dense>
#include <string>
#include <vector>

#include "gordonvar/dates.hpp"

namespace gordonvar {

// Column mapping and grid frequency for the long-format price/dividend file.
struct PanelSchema {
  std::string date_column = "date";
  std::string company_column = "company";
  std::string price_column = "price";
  std::string dividend_column = "dividend";
  Frequency frequency = Frequency::monthly;
};

// Aligned per-period observations. Row t is one grid date, column i one
// company. Prices and dividends are strictly positive so the log transforms
// downstream are defined everywhere.
struct CompanyPanel {
  std::vector<Date> dates;             // T+1, strictly increasing, no gaps
  std::vector<std::string> companies;  // m, sorted
  Eigen::MatrixXd prices;              // (T+1) x m
  Eigen::MatrixXd dividends;           // (T+1) x m
  std::vector<std::string> macro_ids;  // ell
  Eigen::MatrixXd macro;               // (T+1) x ell, 0 columns when absent
  Frequency frequency = Frequency::monthly;

  int periods() const { return static_cast<int>(dates.size()) - 1; }  // T
  int company_count() const { return static_cast<int>(companies.size()); }
  int macro_count() const { return static_cast<int>(macro_ids.size()); }

  void validate() const;  // throws on any broken invariant
};

// One-period return and growth transforms of a panel. Row t covers the step
// from panel row t to panel row t+1, so there are T rate rows.
struct RatePanel {
  std::vector<Date> dates;        // T, the end date of each step
  Eigen::MatrixXd log_required;   // T x m, ln((P_t + d_t) / P_{t-1})
  Eigen::MatrixXd log_growth;     // T x m, ln(d_t / d_{t-1})
  Eigen::MatrixXd log_dividends;  // (T+1) x m, ln d_t for every panel row
  Eigen::MatrixXd raw_required;   // T x m, exp(log_required) - 1
  Eigen::MatrixXd raw_growth;     // T x m, exp(log_growth) - 1

  void validate() const;
};

// Stacked regression input, columns ordered [log_required | log_growth | macro].
struct VarInput {
  Eigen::MatrixXd data;  // T x (2m + ell)
  int m = 0;
  int ell = 0;

  int n() const { return 2 * m + ell; }
};

// Reads the long-format CSV (date,company,price,dividend) and, if given, the
// wide macro CSV (date,<id>,...). Rows may arrive in any order; the result is
// sorted by date. Companies are ordered lexicographically.
CompanyPanel load_panel(const std::string& csv_path, const PanelSchema& schema,
                        const std::string& macro_csv_path = {});

RatePanel compute_rates(const CompanyPanel& panel);

// macro must already be aligned with the rate rows (T x ell).
VarInput assemble_var_input(const RatePanel& rates, const Eigen::MatrixXd& macro);

// Convenience overload: drops the first macro row of the panel to align.
VarInput assemble_var_input(const RatePanel& rates, const CompanyPanel& panel);

}  // namespace gordonvar
