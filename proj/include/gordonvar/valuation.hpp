#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "gordonvar/dates.hpp"
#include "gordonvar/var_model.hpp"

namespace gordonvar {

// Everything the pricing formulas need about "now": the stacked lag state
// seeding the dynamics, current log dividends, and (optionally) observed
// prices for the operations that anchor on them.
struct ForecastContext {
  Eigen::VectorXd state;              // np
  Eigen::VectorXd log_dividends_now;  // m
  std::optional<Eigen::VectorXd> prices_now;  // m
  Date as_of;
};

// Builds the default context from the estimation sample: state from the last
// p input rows (newest first), dividends from the last panel row.
ForecastContext make_context(const VarModel& model, const VarInput& input,
                             const RatePanel& rates,
                             std::optional<Eigen::VectorXd> prices_now = std::nullopt);

// Row selectors pulling the required-return and growth blocks out of y.
struct SelectorSet {
  Eigen::MatrixXd j_k;   // m x n, required-return rows
  Eigen::MatrixXd j_g;   // m x n, growth rows
  Eigen::MatrixXd j_gk;  // j_g - j_k

  static SelectorSet for_layout(int m, int ell);
};

// Strict-inequality gates for the discounted dividend series. first covers
// the mean series, second the (co)moment series; values within `strictness`
// of zero count as failures.
struct ConvergenceReport {
  Eigen::VectorXd first_moment_lhs;                // m
  Eigen::MatrixXd second_moment_lhs;               // m x m
  std::vector<bool> first_ok;                      // m
  std::vector<std::vector<bool>> second_ok;        // m x m

  bool all_first_ok() const;
  bool all_second_ok() const;
};

ConvergenceReport check_convergence(const VarModel& model, const MomentSet& moments,
                                    const SelectorSet& sel, double strictness = 1e-12);

struct SeriesOptions {
  double tol = 1e-10;   // relative truncation target
  int max_terms = 100000;
  int min_terms = 10;   // terms before the ratio test may engage
  int ratio_window = 5; // consecutive sub-unit ratios required
  bool enforce_gate = true;  // refuse divergent inputs; false is a research override
  bool record_trace = false;
  double gate_strictness = 1e-12;
};

struct ValuationResult {
  Eigen::VectorXd price;                   // m, strictly positive
  Eigen::MatrixXd second_moment;           // m x m when filled, else 0 x 0
  std::vector<int> terms_used;             // per company
  Eigen::VectorXd truncation_error_bound;  // per company, absolute
  std::vector<std::vector<double>> trace;  // per-company series terms if recorded

  void validate() const;  // positivity, and the diagonal dominance of the
                          // second moment over the squared price when present
};

// Expected current price of every company: the conditional expectation of the
// discounted dividend series, summed with the adaptive ratio-test truncation.
ValuationResult theoretical_price(const ForecastContext& ctx, const VarModel& model,
                                  const CompanionForm& comp, const SelectorSet& sel,
                                  const SeriesOptions& cfg = {});

// Dividend-anchored expectation of the price `horizon` steps ahead, ignoring
// any observed price. horizon 0 reduces to theoretical_price.
ValuationResult fundamental_forecast(const ForecastContext& ctx, const VarModel& model,
                                     const CompanionForm& comp, const SelectorSet& sel,
                                     int horizon, const SeriesOptions& cfg = {});

struct MixedMomentResult {
  double value = 0.0;
  int terms_used = 0;              // marginal series length per axis
  double truncation_error_bound = 0.0;
};

// E(P_{i1} P_{i2} | state): the double series over the two companies'
// dividend streams, truncated once both marginal tails certify.
MixedMomentResult mixed_moment(const ForecastContext& ctx, const VarModel& model,
                               const CompanionForm& comp, const SelectorSet& sel,
                               int i1, int i2, const SeriesOptions& cfg = {});

// All pairs at once, as the m x m second-moment matrix.
Eigen::MatrixXd second_moment_matrix(const ForecastContext& ctx, const VarModel& model,
                                     const CompanionForm& comp, const SelectorSet& sel,
                                     const SeriesOptions& cfg = {});

// Price-anchored forecast of P_{t+horizon}: compounds the observed price at
// the expected required-return factor and nets out the dividend leg. Finite
// sums, no convergence requirement.
Eigen::VectorXd price_forecast(const ForecastContext& ctx, const VarModel& model,
                               const CompanionForm& comp, const SelectorSet& sel,
                               int horizon);

// Sensitivity of P_{t+horizon} to the time-t innovation vector, evaluated on
// the conditional mean rate path. Row i is company i, column j the shocked
// component of y.
Eigen::MatrixXd price_irf(const ForecastContext& ctx, const VarModel& model,
                          const CompanionForm& comp, const SelectorSet& sel,
                          int horizon);

// Same sensitivity evaluated at an explicit rate path (horizon x n, row j-1
// holding y_{t+j}), for per-path responses.
Eigen::MatrixXd price_irf_at(const ForecastContext& ctx, const VarModel& model,
                             const CompanionForm& comp, const SelectorSet& sel,
                             const Eigen::MatrixXd& rate_path, int horizon);

}  // namespace gordonvar
