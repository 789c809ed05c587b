#include "gordonvar/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <string>
#include <thread>
#include <vector>

#include "gordonvar/errors.hpp"

namespace gordonvar {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::uint64_t mix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// sum in a fixed balanced order so the result is independent of how the work
// was threaded
double pairwise_sum(const double* data, int lo, int hi) {
  if (hi - lo <= 8) {
    double acc = 0.0;
    for (int i = lo; i < hi; ++i) acc += data[i];
    return acc;
  }
  int mid = lo + (hi - lo) / 2;
  return pairwise_sum(data, lo, mid) + pairwise_sum(data, mid, hi);
}

double pairwise_mean(const VectorXd& v) {
  return pairwise_sum(v.data(), 0, static_cast<int>(v.size())) / v.size();
}

MatrixXd psd_root(const MatrixXd& sigma) {
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(0.5 * (sigma + sigma.transpose()));
  if (es.info() != Eigen::Success)
    fail(errc::eigen_solver_failure, "eigensolve failed on the innovation covariance");
  double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    fail(errc::non_psd_sigma, "innovation covariance has a negative eigenvalue");
  VectorXd d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

void run_partitioned(int n_paths, int threads, const std::function<void(int, int)>& body) {
  if (threads <= 1 || n_paths < 2 * threads) {
    body(0, n_paths);
    return;
  }
  std::vector<std::thread> pool;
  int chunk = (n_paths + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    int lo = t * chunk;
    int hi = std::min(n_paths, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(body, lo, hi);
  }
  for (auto& th : pool) th.join();
}

}  // namespace

PathRng::PathRng(std::uint64_t root_seed, std::uint64_t path_index)
    : state_(mix64(root_seed ^ mix64(path_index))) {}

std::uint64_t PathRng::next_u64() {
  state_ += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

double PathRng::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

double PathRng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("GORDONVAR_THREADS")) {
    int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw > 0 ? static_cast<int>(hw) : 1;
}

const std::array<double, 7>& SimulationSummary::quantile_probs() {
  static const std::array<double, 7> probs = {0.01, 0.05, 0.25, 0.5,
                                              0.75, 0.95, 0.99};
  return probs;
}

SimulationSummary simulate_prices(const ForecastContext& ctx, const VarModel& model,
                                  const CompanionForm& comp, const SelectorSet& sel,
                                  const SimulationOptions& opts) {
  if (opts.horizon < 1) fail(errc::horizon_zero, "simulation needs a positive horizon");
  if (opts.n_paths < 1) fail(errc::bad_argument, "simulation needs at least one path");
  if (ctx.state.size() != comp.dim())
    fail(errc::length_mismatch, "context state does not match the stacked dimension");
  if (!ctx.prices_now)
    fail(errc::missing_prices, "simulation rolls observed prices forward, none in context");
  if (ctx.prices_now->size() != model.m || ctx.log_dividends_now.size() != model.m)
    fail(errc::length_mismatch, "context does not match the company count");

  const int m = model.m;
  const int n = model.n();
  const MatrixXd root = psd_root(model.sigma);
  const VectorXd start_prices = *ctx.prices_now;
  const VectorXd start_div = ctx.log_dividends_now.array().exp();

  SimulationSummary out;
  out.terminal.resize(opts.n_paths, m);
  if (opts.keep_horizons) {
    out.horizons.resize(opts.horizon);
    for (auto& h : out.horizons) h.resize(opts.n_paths, m);
  }

  auto body = [&](int lo, int hi) {
    VectorXd x(comp.dim()), z(n), d(m), prices(m);
    for (int idx = lo; idx < hi; ++idx) {
      PathRng rng(opts.seed, static_cast<std::uint64_t>(idx));
      x = ctx.state;
      d = start_div;
      prices = start_prices;
      for (int step = 1; step <= opts.horizon; ++step) {
        for (int c = 0; c < n; ++c) z(c) = rng.normal();
        x = comp.nu_star + comp.a_star * x;
        x.head(n) += root * z;
        for (int i = 0; i < m; ++i) {
          d(i) *= std::exp(x(m + i));
          prices(i) = std::exp(x(i)) * prices(i) - d(i);
        }
        if (opts.keep_horizons) out.horizons[step - 1].row(idx) = prices.transpose();
      }
      out.terminal.row(idx) = prices.transpose();
    }
  };
  run_partitioned(opts.n_paths, resolve_threads(opts.threads), body);

  out.mean.resize(m);
  out.negativity_fraction.resize(m);
  const auto& probs = SimulationSummary::quantile_probs();
  out.quantiles.resize(static_cast<int>(probs.size()), m);
  std::vector<double> column(opts.n_paths);
  for (int i = 0; i < m; ++i) {
    VectorXd col = out.terminal.col(i);
    out.mean(i) = pairwise_mean(col);
    int neg = 0;
    for (int idx = 0; idx < opts.n_paths; ++idx)
      if (col(idx) <= 0.0) ++neg;
    out.negativity_fraction(i) = static_cast<double>(neg) / opts.n_paths;

    std::copy(col.data(), col.data() + opts.n_paths, column.begin());
    std::sort(column.begin(), column.end());
    for (size_t k = 0; k < probs.size(); ++k) {
      double h = probs[k] * (opts.n_paths - 1);
      int lo_idx = static_cast<int>(std::floor(h));
      int hi_idx = std::min(lo_idx + 1, opts.n_paths - 1);
      double w = h - lo_idx;
      out.quantiles(static_cast<int>(k), i) =
          (1.0 - w) * column[lo_idx] + w * column[hi_idx];
    }
  }
  return out;
}

ForecastComparison forecast_comparison(const ForecastContext& ctx_f,
                                       const ForecastContext& ctx_g,
                                       const VarModel& model, const CompanionForm& comp,
                                       const SelectorSet& sel,
                                       const ComparisonOptions& opts) {
  if (opts.horizon < 1) fail(errc::horizon_zero, "comparison needs a positive horizon");
  if (opts.n_paths < 2) fail(errc::bad_argument, "comparison needs at least two paths");

  const int m = model.m;
  const int n = model.n();
  const int r = opts.horizon;
  const int n_paths = opts.n_paths;
  const MatrixXd root = psd_root(model.sigma);

  ForecastComparison out;
  out.nested = opts.nested;
  out.mean_f = fundamental_forecast(ctx_f, model, comp, sel, r, opts.series).price;

  MatrixXd outcomes(n_paths, m);     // the simulated true P_{t+r}
  MatrixXd anchored(n_paths, m);     // per-path price-anchored forecast

  if (!opts.nested) {
    // the observed price is what it is; the true ensemble rolls it forward
    if (!ctx_g.prices_now)
      fail(errc::missing_prices, "price-anchored comparison needs observed prices");
    const VectorXd fc_g = price_forecast(ctx_g, model, comp, sel, r);
    const VectorXd start_prices = *ctx_g.prices_now;
    const VectorXd start_div = ctx_g.log_dividends_now.array().exp();

    auto body = [&](int lo, int hi) {
      VectorXd x(comp.dim()), z(n), d(m), prices(m);
      for (int idx = lo; idx < hi; ++idx) {
        PathRng rng(opts.seed, static_cast<std::uint64_t>(idx));
        x = ctx_g.state;
        d = start_div;
        prices = start_prices;
        for (int step = 1; step <= r; ++step) {
          for (int c = 0; c < n; ++c) z(c) = rng.normal();
          x = comp.nu_star + comp.a_star * x;
          x.head(n) += root * z;
          for (int i = 0; i < m; ++i) {
            d(i) *= std::exp(x(m + i));
            prices(i) = std::exp(x(i)) * prices(i) - d(i);
          }
        }
        outcomes.row(idx) = prices.transpose();
        anchored.row(idx) = fc_g.transpose();
      }
    };
    run_partitioned(n_paths, resolve_threads(opts.threads), body);
    out.mean_g = fc_g;
    out.se_mean_g = VectorXd::Zero(m);
  } else {
    // the current price itself is a draw: each path's discounted dividend
    // stream, so the anchored forecast varies path by path
    VectorXd ones = VectorXd::Ones(m);
    ForecastContext probe = ctx_g;
    probe.prices_now = ones;
    VectorXd fc_one = price_forecast(probe, model, comp, sel, r);
    probe.prices_now = 2.0 * ones;
    VectorXd fc_two = price_forecast(probe, model, comp, sel, r);
    const VectorXd coeff_a = fc_two - fc_one;   // slope on the observed price
    const VectorXd coeff_b = coeff_a - fc_one;  // netted dividend leg

    int q_terms = opts.nested_terms;
    if (q_terms <= 0) {
      ValuationResult th = theoretical_price(ctx_g, model, comp, sel, opts.series);
      int longest = *std::max_element(th.terms_used.begin(), th.terms_used.end());
      q_terms = longest + longest / 2 + 10;
    }
    const int total_steps = q_terms + r;
    const VectorXd start_div = ctx_g.log_dividends_now.array().exp();

    auto body = [&](int lo, int hi) {
      VectorXd x(comp.dim()), z(n);
      VectorXd gsum(m), ksum(m), stream(m), head(m), kr(m);
      for (int idx = lo; idx < hi; ++idx) {
        PathRng rng(opts.seed, static_cast<std::uint64_t>(idx));
        x = ctx_g.state;
        gsum.setZero();
        ksum.setZero();
        stream.setZero();
        head.setZero();
        kr.setZero();
        for (int step = 1; step <= total_steps; ++step) {
          for (int c = 0; c < n; ++c) z(c) = rng.normal();
          x = comp.nu_star + comp.a_star * x;
          x.head(n) += root * z;
          for (int i = 0; i < m; ++i) {
            ksum(i) += x(i);
            gsum(i) += x(m + i);
            double leg = std::exp(gsum(i) - ksum(i));
            stream(i) += leg;
            if (step <= r) head(i) += leg;
          }
          if (step == r) kr = ksum;
        }
        for (int i = 0; i < m; ++i) {
          double price_now = start_div(i) * stream(i);
          double outcome = std::exp(kr(i)) * (price_now - start_div(i) * head(i));
          outcomes(idx, i) = outcome;
          anchored(idx, i) = coeff_a(i) * price_now - coeff_b(i);
        }
      }
    };
    run_partitioned(n_paths, resolve_threads(opts.threads), body);

    out.mean_g.resize(m);
    out.se_mean_g.resize(m);
    for (int i = 0; i < m; ++i) {
      VectorXd col = anchored.col(i);
      double mu = pairwise_mean(col);
      VectorXd dev = (col.array() - mu).square();
      double var = pairwise_sum(dev.data(), 0, n_paths) / (n_paths - 1);
      out.mean_g(i) = mu;
      out.se_mean_g(i) = std::sqrt(var / n_paths);
    }
  }

  out.mse_f.resize(m);
  out.mse_g.resize(m);
  out.se_mse_diff.resize(m);
  for (int i = 0; i < m; ++i) {
    VectorXd err_f = (outcomes.col(i).array() - out.mean_f(i)).square();
    VectorXd err_g = (outcomes.col(i) - anchored.col(i)).array().square();
    out.mse_f(i) = pairwise_sum(err_f.data(), 0, n_paths) / n_paths;
    out.mse_g(i) = pairwise_sum(err_g.data(), 0, n_paths) / n_paths;
    VectorXd diff = err_f - err_g;
    double mu = pairwise_mean(diff);
    VectorXd dev = (diff.array() - mu).square();
    double var = pairwise_sum(dev.data(), 0, n_paths) / (n_paths - 1);
    out.se_mse_diff(i) = std::sqrt(var / n_paths);
  }
  return out;
}

}  // namespace gordonvar
