#include "gordonvar/valuation.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "gordonvar/errors.hpp"

namespace gordonvar {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

void check_context(const ForecastContext& ctx, const VarModel& model,
                   const CompanionForm& comp) {
  if (ctx.state.size() != comp.dim())
    fail(errc::length_mismatch, "context state has " + std::to_string(ctx.state.size()) +
                                    " entries, stacked dimension is " +
                                    std::to_string(comp.dim()));
  if (ctx.log_dividends_now.size() != model.m)
    fail(errc::length_mismatch, "context carries " +
                                    std::to_string(ctx.log_dividends_now.size()) +
                                    " dividends for " + std::to_string(model.m) +
                                    " companies");
}

const Eigen::VectorXd& require_prices(const ForecastContext& ctx, const VarModel& model) {
  if (!ctx.prices_now)
    fail(errc::missing_prices, "operation anchors on observed prices, none in context");
  if (ctx.prices_now->size() != model.m)
    fail(errc::length_mismatch, "context carries " +
                                    std::to_string(ctx.prices_now->size()) +
                                    " prices for " + std::to_string(model.m) +
                                    " companies");
  return *ctx.prices_now;
}

// Running mean and covariance of the companion-state partial sums
// V_q = sum_{j=1..q} x_{t+j}. One advance() moves every cumulant from q to
// q+1 in O(dim^3).
struct SeriesTracker {
  const CompanionForm& comp;
  MatrixXd s_star;  // J' sigma J
  VectorXd s;       // E x_{t+q}
  VectorXd msum;    // E V_q
  MatrixXd cov_q;   // Var x_{t+q}
  MatrixXd cross;   // Cov(x_{t+q}, V_q)
  MatrixXd var_sum; // Var V_q
  int q = 0;

  SeriesTracker(const CompanionForm& c, const MatrixXd& sigma, const VectorXd& state)
      : comp(c),
        s_star(MatrixXd::Zero(c.dim(), c.dim())),
        s(state),
        msum(VectorXd::Zero(c.dim())),
        cov_q(MatrixXd::Zero(c.dim(), c.dim())),
        cross(MatrixXd::Zero(c.dim(), c.dim())),
        var_sum(MatrixXd::Zero(c.dim(), c.dim())) {
    s_star.topLeftCorner(c.n, c.n) = sigma;
  }

  void advance() {
    s = comp.nu_star + comp.a_star * s;
    msum += s;
    if (q == 0) {
      cov_q = s_star;
      cross = s_star;
      var_sum = s_star;
    } else {
      MatrixXd ax = comp.a_star * cross;
      cov_q = comp.a_star * cov_q * comp.a_star.transpose() + s_star;
      cross = ax + cov_q;
      var_sum += cov_q + ax + ax.transpose();
    }
    ++q;
  }
};

int first_failing_company(const std::vector<bool>& ok) {
  for (size_t i = 0; i < ok.size(); ++i)
    if (!ok[i]) return static_cast<int>(i);
  return -1;
}

void enforce_first_gate(const VarModel& model, const CompanionForm& comp,
                        const SelectorSet& sel, double strictness) {
  SpectralInfo spec = spectral(comp);
  MomentSet mom = limit_moments(model, comp, spec);
  ConvergenceReport rep = check_convergence(model, mom, sel, strictness);
  int bad = first_failing_company(rep.first_ok);
  if (bad >= 0)
    fail(errc::not_convergent,
         "mean series for company " + std::to_string(bad) +
             " fails the convergence gate (lhs " +
             std::to_string(rep.first_moment_lhs(bad)) + ")");
}

void enforce_second_gate(const VarModel& model, const CompanionForm& comp,
                         const SelectorSet& sel, int i1, int i2, double strictness) {
  SpectralInfo spec = spectral(comp);
  MomentSet mom = limit_moments(model, comp, spec);
  ConvergenceReport rep = check_convergence(model, mom, sel, strictness);
  if (!rep.second_ok[i1][i2])
    fail(errc::not_convergent,
         "second-moment series for companies " + std::to_string(i1) + "," +
             std::to_string(i2) + " fails the convergence gate (lhs " +
             std::to_string(rep.second_moment_lhs(i1, i2)) + ")");
}

// Shared core of theoretical_price (horizon 0) and fundamental_forecast:
// every term is exp(dlog_i + a' V_r + b' (V_{r+q} - V_r)) in expectation,
// with a the growth selector over the first r steps and b = growth - return
// thereafter.
ValuationResult dividend_series(const ForecastContext& ctx, const VarModel& model,
                                const CompanionForm& comp, const SelectorSet& sel,
                                int horizon, const SeriesOptions& cfg) {
  check_context(ctx, model, comp);
  if (horizon < 0) fail(errc::bad_argument, "forecast horizon cannot be negative");
  if (cfg.enforce_gate)
    enforce_first_gate(model, comp, sel, cfg.gate_strictness);

  const int m = model.m;
  const MatrixXd j = comp.selector();
  std::vector<VectorXd> cb(m), ca(m);
  for (int i = 0; i < m; ++i) {
    cb[i] = (sel.j_gk.row(i) * j).transpose();
    ca[i] = (sel.j_g.row(i) * j).transpose();
  }

  SeriesTracker tr(comp, model.sigma, ctx.state);
  for (int r = 0; r < horizon; ++r) tr.advance();

  const VectorXd msum_r = tr.msum;
  const MatrixXd var_r = tr.var_sum;
  const MatrixXd cross_r = tr.cross;
  std::vector<double> base_mean(m), base_var(m);
  std::vector<VectorXd> xa(m), xb(m);
  for (int i = 0; i < m; ++i) {
    base_mean[i] = ca[i].dot(msum_r);
    base_var[i] = ca[i].dot(var_r * ca[i]);
    xa[i] = cross_r * ca[i];
    xb[i] = cross_r * cb[i];
  }

  ValuationResult res;
  res.price = VectorXd::Zero(m);
  res.terms_used.assign(m, 0);
  res.truncation_error_bound = VectorXd::Zero(m);
  if (cfg.record_trace) res.trace.resize(m);

  std::vector<double> prev_term(m, 0.0);
  std::vector<std::vector<double>> ratios(m);
  std::vector<int> consec(m, 0);
  std::vector<bool> done(m, false);
  int active = m;

  MatrixXd t_pow = MatrixXd::Zero(comp.dim(), comp.dim());  // sum_{v=1..q} A*^v
  const MatrixXd eye = MatrixXd::Identity(comp.dim(), comp.dim());

  for (int q = 1; q <= cfg.max_terms && active > 0; ++q) {
    tr.advance();
    t_pow = comp.a_star * (eye + t_pow);
    for (int i = 0; i < m; ++i) {
      if (done[i]) continue;
      VectorXd tb = t_pow.transpose() * cb[i];
      double mean = base_mean[i] + cb[i].dot(tr.msum - msum_r);
      double var = base_var[i] + cb[i].dot(tr.var_sum * cb[i]) -
                   cb[i].dot(var_r * cb[i]) - 2.0 * xb[i].dot(tb) +
                   2.0 * xa[i].dot(tb);
      double term = std::exp(ctx.log_dividends_now(i) + mean + 0.5 * var);
      res.price(i) += term;
      if (cfg.record_trace) res.trace[i].push_back(term);
      if (q > 1) {
        double ratio = prev_term[i] > 0.0 ? term / prev_term[i] : 0.0;
        ratios[i].push_back(ratio);
        consec[i] = ratio < 1.0 ? consec[i] + 1 : 0;
      }
      prev_term[i] = term;
      if (q >= cfg.min_terms && consec[i] >= cfg.ratio_window) {
        double rhat = 0.0;
        for (int w = 0; w < cfg.ratio_window; ++w)
          rhat = std::max(rhat, ratios[i][ratios[i].size() - 1 - w]);
        double bound = term * rhat / (1.0 - rhat);
        if (bound < cfg.tol * res.price(i)) {
          done[i] = true;
          --active;
          res.terms_used[i] = q;
          res.truncation_error_bound(i) = bound;
        }
      }
    }
  }
  if (active > 0) {
    int bad = first_failing_company(done);
    fail(errc::tail_bound_not_reached,
         "series for company " + std::to_string(bad) + " not certified to " +
             std::to_string(cfg.tol) + " within " + std::to_string(cfg.max_terms) +
             " terms");
  }
  res.validate();
  return res;
}

}  // namespace

ForecastContext make_context(const VarModel& model, const VarInput& input,
                             const RatePanel& rates,
                             std::optional<Eigen::VectorXd> prices_now) {
  const int n = model.n();
  const int p = model.p();
  const int rows = static_cast<int>(input.data.rows());
  if (input.n() != n)
    fail(errc::length_mismatch, "input block widths disagree with the model layout");
  if (rows < p)
    fail(errc::insufficient_data, std::to_string(rows) + " sample rows cannot seed " +
                                      std::to_string(p) + " lags");
  if (rates.dates.empty())
    fail(errc::insufficient_data, "rate panel is empty");
  if (rates.log_dividends.cols() != model.m)
    fail(errc::length_mismatch, "rate panel covers " +
                                    std::to_string(rates.log_dividends.cols()) +
                                    " companies, model has " + std::to_string(model.m));
  if (prices_now && prices_now->size() != model.m)
    fail(errc::length_mismatch, "price vector does not match the company count");

  ForecastContext ctx;
  ctx.state.resize(n * p);
  for (int u = 0; u < p; ++u)
    ctx.state.segment(u * n, n) = input.data.row(rows - 1 - u).transpose();
  ctx.log_dividends_now =
      rates.log_dividends.row(rates.log_dividends.rows() - 1).transpose();
  ctx.prices_now = std::move(prices_now);
  ctx.as_of = rates.dates.back();
  return ctx;
}

SelectorSet SelectorSet::for_layout(int m, int ell) {
  if (m < 0 || ell < 0 || 2 * m + ell < 1)
    fail(errc::bad_argument, "layout needs at least one variable");
  const int n = 2 * m + ell;
  SelectorSet sel;
  sel.j_k = MatrixXd::Zero(m, n);
  sel.j_g = MatrixXd::Zero(m, n);
  for (int i = 0; i < m; ++i) {
    sel.j_k(i, i) = 1.0;
    sel.j_g(i, m + i) = 1.0;
  }
  sel.j_gk = sel.j_g - sel.j_k;
  return sel;
}

bool ConvergenceReport::all_first_ok() const {
  return std::all_of(first_ok.begin(), first_ok.end(), [](bool b) { return b; });
}

bool ConvergenceReport::all_second_ok() const {
  for (const auto& row : second_ok)
    for (bool b : row)
      if (!b) return false;
  return true;
}

ConvergenceReport check_convergence(const VarModel& model, const MomentSet& moments,
                                    const SelectorSet& sel, double strictness) {
  const int m = model.m;
  ConvergenceReport rep;
  rep.first_moment_lhs.resize(m);
  rep.second_moment_lhs.resize(m, m);
  rep.first_ok.assign(m, false);
  rep.second_ok.assign(m, std::vector<bool>(m, false));

  VectorXd h(m);
  for (int i = 0; i < m; ++i) {
    VectorXd b = sel.j_gk.row(i).transpose();
    double drift = b.dot(moments.mu);
    rep.first_moment_lhs(i) =
        drift + b.dot((0.5 * moments.gamma0 + moments.gamma) * b);
    h(i) = drift + b.dot((moments.gamma0 + 2.0 * moments.gamma) * b);
    rep.first_ok[i] = rep.first_moment_lhs(i) < -strictness;
  }
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = 0; i2 < m; ++i2) {
      rep.second_moment_lhs(i1, i2) = std::max(h(i1), h(i2));
      rep.second_ok[i1][i2] = rep.second_moment_lhs(i1, i2) < -strictness;
    }
  return rep;
}

void ValuationResult::validate() const {
  for (int i = 0; i < price.size(); ++i)
    if (!(price(i) > 0.0))
      fail(errc::non_positive_price,
           "company " + std::to_string(i) + " priced at " + std::to_string(price(i)));
  if (second_moment.size() > 0)
    for (int i = 0; i < price.size(); ++i) {
      double p2 = price(i) * price(i);
      if (second_moment(i, i) < p2 * (1.0 - 1e-9) - 1e-12)
        fail(errc::bad_argument, "second moment of company " + std::to_string(i) +
                                     " sits below its squared price");
    }
}

ValuationResult theoretical_price(const ForecastContext& ctx, const VarModel& model,
                                  const CompanionForm& comp, const SelectorSet& sel,
                                  const SeriesOptions& cfg) {
  return dividend_series(ctx, model, comp, sel, 0, cfg);
}

ValuationResult fundamental_forecast(const ForecastContext& ctx, const VarModel& model,
                                     const CompanionForm& comp, const SelectorSet& sel,
                                     int horizon, const SeriesOptions& cfg) {
  return dividend_series(ctx, model, comp, sel, horizon, cfg);
}

MixedMomentResult mixed_moment(const ForecastContext& ctx, const VarModel& model,
                               const CompanionForm& comp, const SelectorSet& sel,
                               int i1, int i2, const SeriesOptions& cfg) {
  check_context(ctx, model, comp);
  if (i1 < 0 || i1 >= model.m || i2 < 0 || i2 >= model.m)
    fail(errc::bad_argument, "company index out of range");
  if (cfg.enforce_gate)
    enforce_second_gate(model, comp, sel, i1, i2, cfg.gate_strictness);

  const MatrixXd j = comp.selector();
  const VectorXd c1 = (sel.j_gk.row(i1) * j).transpose();
  const VectorXd c2 = (sel.j_gk.row(i2) * j).transpose();
  const double dl = ctx.log_dividends_now(i1) + ctx.log_dividends_now(i2);

  SeriesTracker tr(comp, model.sigma, ctx.state);
  MatrixXd t_pow = MatrixXd::Zero(comp.dim(), comp.dim());
  const MatrixXd eye = MatrixXd::Identity(comp.dim(), comp.dim());

  // per-q marginals, index 0 unused
  std::vector<double> m1{0.0}, m2{0.0}, v11{0.0}, v22{0.0}, v12{0.0};
  std::vector<double> b1{0.0}, b2{0.0};
  std::vector<VectorXd> px1{VectorXd()}, px2{VectorXd()};
  std::vector<VectorXd> tc1{VectorXd::Zero(comp.dim())},
      tc2{VectorXd::Zero(comp.dim())};  // T_d' c, d from 0

  double total = 0.0;
  double sum_b1 = 0.0, sum_b2 = 0.0;
  int consec1 = 0, consec2 = 0;
  std::vector<double> r1, r2;
  MixedMomentResult out;

  for (int q = 1; q <= cfg.max_terms; ++q) {
    tr.advance();
    m1.push_back(c1.dot(tr.msum));
    m2.push_back(c2.dot(tr.msum));
    v11.push_back(c1.dot(tr.var_sum * c1));
    v22.push_back(c2.dot(tr.var_sum * c2));
    v12.push_back(c1.dot(tr.var_sum * c2));
    px1.push_back(tr.cross * c1);
    px2.push_back(tr.cross * c2);
    if (q > 1) {
      tc1.push_back(t_pow.transpose() * c1);
      tc2.push_back(t_pow.transpose() * c2);
    }
    t_pow = comp.a_star * (eye + t_pow);

    double nb1 = std::exp(ctx.log_dividends_now(i1) + m1[q] + v11[q]);
    double nb2 = std::exp(ctx.log_dividends_now(i2) + m2[q] + v22[q]);
    if (q > 1) {
      double q1r = b1[q - 1] > 0.0 ? nb1 / b1[q - 1] : 0.0;
      double q2r = b2[q - 1] > 0.0 ? nb2 / b2[q - 1] : 0.0;
      r1.push_back(q1r);
      r2.push_back(q2r);
      consec1 = q1r < 1.0 ? consec1 + 1 : 0;
      consec2 = q2r < 1.0 ? consec2 + 1 : 0;
    }
    b1.push_back(nb1);
    b2.push_back(nb2);
    sum_b1 += nb1;
    sum_b2 += nb2;

    // new ring: (q, q), (q, q2<q), (q1<q, q)
    total += std::exp(dl + m1[q] + m2[q] + 0.5 * v11[q] + 0.5 * v22[q] + v12[q]);
    for (int q2 = 1; q2 < q; ++q2)
      total += std::exp(dl + m1[q] + m2[q2] + 0.5 * v11[q] + 0.5 * v22[q2] +
                        v12[q2] + px2[q2].dot(tc1[q - q2]));
    for (int q1 = 1; q1 < q; ++q1)
      total += std::exp(dl + m1[q1] + m2[q] + 0.5 * v11[q1] + 0.5 * v22[q] +
                        v12[q1] + px1[q1].dot(tc2[q - q1]));

    if (q >= cfg.min_terms && consec1 >= cfg.ratio_window &&
        consec2 >= cfg.ratio_window) {
      double rh1 = 0.0, rh2 = 0.0;
      for (int w = 0; w < cfg.ratio_window; ++w) {
        rh1 = std::max(rh1, r1[r1.size() - 1 - w]);
        rh2 = std::max(rh2, r2[r2.size() - 1 - w]);
      }
      double tb1 = b1[q] * rh1 / (1.0 - rh1);
      double tb2 = b2[q] * rh2 / (1.0 - rh2);
      double bound = tb1 * sum_b2 + tb2 * sum_b1 + tb1 * tb2;
      if (bound < cfg.tol * total) {
        out.value = total;
        out.terms_used = q;
        out.truncation_error_bound = bound;
        return out;
      }
    }
  }
  fail(errc::tail_bound_not_reached,
       "double series for companies " + std::to_string(i1) + "," +
           std::to_string(i2) + " not certified to " + std::to_string(cfg.tol) +
           " within " + std::to_string(cfg.max_terms) + " terms");
}

Eigen::MatrixXd second_moment_matrix(const ForecastContext& ctx, const VarModel& model,
                                     const CompanionForm& comp, const SelectorSet& sel,
                                     const SeriesOptions& cfg) {
  const int m = model.m;
  MatrixXd out(m, m);
  for (int i1 = 0; i1 < m; ++i1)
    for (int i2 = i1; i2 < m; ++i2) {
      double v = mixed_moment(ctx, model, comp, sel, i1, i2, cfg).value;
      out(i1, i2) = v;
      out(i2, i1) = v;
    }
  return out;
}

Eigen::VectorXd price_forecast(const ForecastContext& ctx, const VarModel& model,
                               const CompanionForm& comp, const SelectorSet& sel,
                               int horizon) {
  check_context(ctx, model, comp);
  const VectorXd& prices = require_prices(ctx, model);
  if (horizon < 1) fail(errc::horizon_zero, "price forecast needs a positive horizon");

  const int m = model.m;
  const int r = horizon;
  const MatrixXd j = comp.selector();

  std::vector<VectorXd> means(r + 1);  // companion means, 1-based
  VectorXd s = ctx.state;
  for (int step = 1; step <= r; ++step) {
    s = comp.nu_star + comp.a_star * s;
    means[step] = s;
  }

  VectorXd out(m);
  for (int i = 0; i < m; ++i) {
    VectorXd ck = (sel.j_k.row(i) * j).transpose();
    VectorXd cg = (sel.j_g.row(i) * j).transpose();

    // leg q: dividend paid at t+q, compounded to t+r; q = 0 is the price leg
    auto leg = [&](int q) {
      double mean = 0.0;
      double var = 0.0;
      VectorXd dvec = VectorXd::Zero(comp.dim());
      for (int u = r; u >= 1; --u) {
        const VectorXd& cu = (u <= q) ? cg : ck;
        mean += cu.dot(means[u]);
        dvec = cu + comp.a_star.transpose() * dvec;
        VectorXd head = dvec.head(comp.n);
        var += head.dot(model.sigma * head);
      }
      return std::exp(mean + 0.5 * var);
    };

    double fc = leg(0) * prices(i);
    for (int q = 1; q <= r; ++q)
      fc -= std::exp(ctx.log_dividends_now(i)) * leg(q);
    out(i) = fc;
  }
  return out;
}

Eigen::MatrixXd price_irf_at(const ForecastContext& ctx, const VarModel& model,
                             const CompanionForm& comp, const SelectorSet& sel,
                             const Eigen::MatrixXd& rate_path, int horizon) {
  check_context(ctx, model, comp);
  const VectorXd& prices = require_prices(ctx, model);
  if (horizon < 1) fail(errc::horizon_zero, "impulse response needs a positive horizon");
  if (rate_path.rows() != horizon || rate_path.cols() != model.n())
    fail(errc::length_mismatch, "rate path must be horizon x n");

  const int m = model.m;
  const int n = model.n();

  // sensitivities of future rates to the time-t shock: row block of (A*)^j J'
  MatrixXd delta = MatrixXd::Zero(comp.dim(), n);
  delta.topRows(n).setIdentity();

  std::vector<double> level_d(m), level_p(m);
  std::vector<Eigen::RowVectorXd> sum_dg(m, Eigen::RowVectorXd::Zero(n));
  std::vector<Eigen::RowVectorXd> dP(m, Eigen::RowVectorXd::Zero(n));
  for (int i = 0; i < m; ++i) {
    level_d[i] = std::exp(ctx.log_dividends_now(i));
    level_p[i] = prices(i);
  }

  for (int step = 1; step <= horizon; ++step) {
    delta = comp.a_star * delta;
    for (int i = 0; i < m; ++i) {
      double k = rate_path(step - 1, i);
      double g = rate_path(step - 1, m + i);
      sum_dg[i] += delta.row(m + i);
      level_d[i] *= std::exp(g);
      Eigen::RowVectorXd dD = level_d[i] * sum_dg[i];
      dP[i] = std::exp(k) * (level_p[i] * delta.row(i) + dP[i]) - dD;
      level_p[i] = std::exp(k) * level_p[i] - level_d[i];
    }
  }

  MatrixXd out(m, n);
  for (int i = 0; i < m; ++i) out.row(i) = dP[i];
  return out;
}

Eigen::MatrixXd price_irf(const ForecastContext& ctx, const VarModel& model,
                          const CompanionForm& comp, const SelectorSet& sel,
                          int horizon) {
  if (horizon < 1) fail(errc::horizon_zero, "impulse response needs a positive horizon");
  MatrixXd path(horizon, model.n());
  VectorXd s = ctx.state;
  for (int step = 1; step <= horizon; ++step) {
    s = comp.nu_star + comp.a_star * s;
    path.row(step - 1) = s.head(model.n()).transpose();
  }
  return price_irf_at(ctx, model, comp, sel, path, horizon);
}

}  // namespace gordonvar
