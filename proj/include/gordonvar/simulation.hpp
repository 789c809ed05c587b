#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <vector>

#include "gordonvar/valuation.hpp"

namespace gordonvar {

// Deterministic per-path draw stream. The root seed and the path index fully
// determine the sequence, so growing the ensemble never perturbs the paths
// already drawn.
class PathRng {
 public:
  PathRng(std::uint64_t root_seed, std::uint64_t path_index);

  double uniform();  // (0, 1)
  double normal();   // standard normal, Marsaglia polar

 private:
  std::uint64_t next_u64();

  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

// Thread count for ensemble work: explicit request, else GORDONVAR_THREADS,
// else hardware concurrency.
int resolve_threads(int requested);

struct SimulationOptions {
  int horizon = 1;
  int n_paths = 1;
  std::uint64_t seed = 0;
  int threads = 0;          // 0 = resolve from environment
  bool keep_horizons = false;  // retain the ensemble at every step, not just
                               // the terminal one
};

struct SimulationSummary {
  Eigen::MatrixXd terminal;             // n_paths x m, prices at t+horizon
  Eigen::VectorXd mean;                 // m, pairwise-summed ensemble mean
  Eigen::VectorXd negativity_fraction;  // m, share of paths ending <= 0
  Eigen::MatrixXd quantiles;            // quantile_probs.size() x m
  std::vector<Eigen::MatrixXd> horizons;  // per-step ensembles when kept

  static const std::array<double, 7>& quantile_probs();
};

// Draws innovation paths, propagates the lag state, and rolls the observed
// price forward with the compounded required return net of dividends.
// Negative simulated prices are kept as-is and surface in
// negativity_fraction rather than being clipped.
SimulationSummary simulate_prices(const ForecastContext& ctx, const VarModel& model,
                                  const CompanionForm& comp, const SelectorSet& sel,
                                  const SimulationOptions& opts);

struct ComparisonOptions {
  int horizon = 1;
  int n_paths = 10000;
  std::uint64_t seed = 0;
  int threads = 0;
  bool nested = false;  // draw the current price per path from the model's own
                        // discounted series instead of anchoring on ctx prices
  int nested_terms = 0; // series truncation for the per-path current price;
                        // 0 picks it from the series tolerance
  SeriesOptions series;
};

// Accuracy of the price-anchored forecast against the dividend-anchored one
// on a simulated ensemble of true outcomes.
struct ForecastComparison {
  Eigen::VectorXd mean_f;       // dividend-anchored forecast (one number)
  Eigen::VectorXd mean_g;       // ensemble mean of the price-anchored forecast
  Eigen::VectorXd mse_f;
  Eigen::VectorXd mse_g;
  Eigen::VectorXd se_mean_g;    // MC standard error of mean_g
  Eigen::VectorXd se_mse_diff;  // MC standard error of mse_f - mse_g
  bool nested = false;
};

ForecastComparison forecast_comparison(const ForecastContext& ctx_f,
                                       const ForecastContext& ctx_g,
                                       const VarModel& model, const CompanionForm& comp,
                                       const SelectorSet& sel,
                                       const ComparisonOptions& opts);

}  // namespace gordonvar
