#include "gordonvar/var_model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "gordonvar/errors.hpp"

namespace gordonvar {

namespace {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// sigma lifted into the companion state: innovations hit the newest block only.
MatrixXd lift_sigma(const CompanionForm& comp, const MatrixXd& sigma) {
  MatrixXd big = MatrixXd::Zero(comp.dim(), comp.dim());
  big.topLeftCorner(comp.n, comp.n) = sigma;
  return big;
}

MatrixXd clamp_psd(const MatrixXd& s) {
  MatrixXd sym = 0.5 * (s + s.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sym);
  if (es.info() != Eigen::Success)
    fail(errc::eigen_solver_failure, "symmetric eigensolve failed on the residual covariance");
  VectorXd d = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace

void VarModel::validate() const {
  const int dim = n();
  if (m < 0 || ell < 0 || dim <= 0)
    fail(errc::bad_argument, "model needs a positive number of variables");
  if (lags.empty()) fail(errc::bad_argument, "model needs at least one lag");
  if (nu.size() != dim)
    fail(errc::length_mismatch, "intercept has " + std::to_string(nu.size()) +
                                    " entries for " + std::to_string(dim) + " variables");
  for (const auto& a : lags)
    if (a.rows() != dim || a.cols() != dim)
      fail(errc::length_mismatch, "lag matrix is not " + std::to_string(dim) + "x" +
                                      std::to_string(dim));
  if (sigma.rows() != dim || sigma.cols() != dim)
    fail(errc::length_mismatch, "innovation covariance is not " + std::to_string(dim) +
                                    "x" + std::to_string(dim));
  const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    fail(errc::non_psd_sigma, "innovation covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(sigma);
  if (es.info() != Eigen::Success)
    fail(errc::eigen_solver_failure, "eigensolve failed on the innovation covariance");
  if (es.eigenvalues().minCoeff() < -1e-10 * scale)
    fail(errc::non_psd_sigma, "innovation covariance has a negative eigenvalue");
}

VarModel estimate_ols(const VarInput& input, int lag_order) {
  if (lag_order < 1) fail(errc::bad_argument, "lag order must be at least 1");
  const int T = static_cast<int>(input.data.rows());
  const int n = input.n();
  if (static_cast<int>(input.data.cols()) != n)
    fail(errc::length_mismatch, "input block widths disagree with m and ell");
  const int p = lag_order;
  const int obs = T - p;
  const int k = n * p + 1;
  if (obs < k)
    fail(errc::insufficient_data, std::to_string(obs) + " usable observations for " +
                                      std::to_string(k) + " regressors");

  MatrixXd x(obs, k);
  MatrixXd y(obs, n);
  for (int t = p; t < T; ++t) {
    x(t - p, 0) = 1.0;
    for (int u = 1; u <= p; ++u)
      x.block(t - p, 1 + (u - 1) * n, 1, n) = input.data.row(t - u);
    y.row(t - p) = input.data.row(t);
  }

  Eigen::ColPivHouseholderQR<MatrixXd> qr(x);
  if (qr.rank() < k)
    fail(errc::singular_regressors, "regressor matrix has rank " +
                                        std::to_string(qr.rank()) + " of " +
                                        std::to_string(k));
  MatrixXd b = qr.solve(y);

  VarModel model;
  model.m = input.m;
  model.ell = input.ell;
  model.nu = b.row(0).transpose();
  model.lags.resize(p);
  for (int u = 1; u <= p; ++u)
    model.lags[u - 1] = b.middleRows(1 + (u - 1) * n, n).transpose();

  MatrixXd resid = y - x * b;
  const int divisor = std::max(T - p - n * p - 1, 1);
  model.sigma = clamp_psd(resid.transpose() * resid / divisor);
  model.validate();
  return model;
}

Eigen::MatrixXd CompanionForm::selector() const {
  MatrixXd j = MatrixXd::Zero(n, dim());
  j.leftCols(n).setIdentity();
  return j;
}

CompanionForm companion(const VarModel& model) {
  model.validate();
  CompanionForm comp;
  comp.n = model.n();
  comp.p = model.p();
  const int np = comp.dim();
  comp.a_star = MatrixXd::Zero(np, np);
  for (int u = 0; u < comp.p; ++u)
    comp.a_star.block(0, u * comp.n, comp.n, comp.n) = model.lags[u];
  for (int u = 1; u < comp.p; ++u)
    comp.a_star.block(u * comp.n, (u - 1) * comp.n, comp.n, comp.n) =
        MatrixXd::Identity(comp.n, comp.n);
  comp.nu_star = VectorXd::Zero(np);
  comp.nu_star.head(comp.n) = model.nu;
  return comp;
}

SpectralInfo spectral(const CompanionForm& comp, const SpectralOptions& opts) {
  Eigen::EigenSolver<MatrixXd> es(comp.a_star);
  if (es.info() != Eigen::Success)
    fail(errc::eigen_solver_failure, "eigensolve failed on the stacked matrix");

  const int np = comp.dim();
  std::vector<int> order(np);
  std::iota(order.begin(), order.end(), 0);
  const VectorXcd& raw = es.eigenvalues();
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    double ma = std::abs(raw[a]), mb = std::abs(raw[b]);
    if (ma != mb) return ma > mb;
    if (raw[a].real() != raw[b].real()) return raw[a].real() > raw[b].real();
    return raw[a].imag() > raw[b].imag();
  });

  SpectralInfo info;
  info.eigenvalues.resize(np);
  info.eigenvectors.resize(np, np);
  for (int i = 0; i < np; ++i) {
    info.eigenvalues[i] = raw[order[i]];
    info.eigenvectors.col(i) = es.eigenvectors().col(order[i]);
  }
  info.max_modulus = std::abs(info.eigenvalues[0]);
  info.stable = info.max_modulus < 1.0 - opts.stability_margin;
  info.distinct = true;
  for (int i = 0; i < np && info.distinct; ++i)
    for (int j = i + 1; j < np; ++j)
      if (std::abs(info.eigenvalues[i] - info.eigenvalues[j]) <= opts.distinctness_tol) {
        info.distinct = false;
        break;
      }
  return info;
}

Eigen::MatrixXd phi(const CompanionForm& comp, int q) {
  if (q < 0) fail(errc::bad_argument, "negative lag in the moving-average weight");
  const int n = comp.n;
  if (q == 0) return MatrixXd::Identity(n, n);
  MatrixXd pw = comp.a_star;
  for (int s = 1; s < q; ++s) pw = comp.a_star * pw;
  return pw.topLeftCorner(n, n);
}

Eigen::VectorXd conditional_mean(const VarModel& model, const CompanionForm& comp,
                                 const Eigen::VectorXd& state, int horizon) {
  if (horizon < 1) fail(errc::horizon_zero, "conditional mean needs a positive horizon");
  if (state.size() != comp.dim())
    fail(errc::length_mismatch, "state has " + std::to_string(state.size()) +
                                    " entries, stacked dimension is " +
                                    std::to_string(comp.dim()));
  VectorXd s = state;
  for (int j = 0; j < horizon; ++j) s = comp.nu_star + comp.a_star * s;
  return s.head(model.n());
}

Eigen::MatrixXd conditional_cov(const VarModel& model, const CompanionForm& comp,
                                int j1, int j2) {
  if (j1 < 1 || j2 < 1)
    fail(errc::horizon_zero, "conditional covariance needs positive horizons");
  const int n = model.n();
  const int top = std::max(j1, j2) - 1;
  std::vector<MatrixXd> phis(top + 1);
  phis[0] = MatrixXd::Identity(n, n);
  MatrixXd pw = MatrixXd::Identity(comp.dim(), comp.dim());
  for (int s = 1; s <= top; ++s) {
    pw = comp.a_star * pw;
    phis[s] = pw.topLeftCorner(n, n);
  }
  MatrixXd acc = MatrixXd::Zero(n, n);
  for (int q = 1; q <= std::min(j1, j2); ++q)
    acc += phis[j1 - q] * model.sigma * phis[j2 - q].transpose();
  return acc;
}

Eigen::MatrixXd solve_companion_covariance(const CompanionForm& comp,
                                           const Eigen::MatrixXd& sigma) {
  // doubling iteration: after k rounds v holds sum_{j<2^k} A^j S A'^j
  MatrixXd v = lift_sigma(comp, sigma);
  MatrixXd pw = comp.a_star;
  for (int round = 0; round < 128; ++round) {
    MatrixXd update = pw * v * pw.transpose();
    v += update;
    double scale = std::max(1.0, v.cwiseAbs().maxCoeff());
    if (update.cwiseAbs().maxCoeff() <= 1e-18 * scale) break;
    pw = pw * pw;
  }
  return 0.5 * (v + v.transpose());
}

Eigen::MatrixXd gamma_eigen_form(const CompanionForm& comp, const SpectralInfo& spec,
                                 const Eigen::MatrixXd& sigma) {
  if (!spec.distinct)
    fail(errc::eigen_solver_failure,
         "spectral route needs distinct eigenvalues; use the truncated route");
  const int np = comp.dim();
  const MatrixXcd c = spec.eigenvectors;
  Eigen::PartialPivLU<MatrixXcd> lu(c);
  MatrixXcd m = lu.solve(lift_sigma(comp, sigma).cast<std::complex<double>>());
  MatrixXcd g = lu.solve(m.transpose());  // C^-1 S (C^-1)^T

  MatrixXcd weighted(np, np);
  for (int a = 0; a < np; ++a)
    for (int b = 0; b < np; ++b) {
      std::complex<double> la = spec.eigenvalues[a], lb = spec.eigenvalues[b];
      weighted(a, b) = g(a, b) * la / ((1.0 - la) * (1.0 - la * lb));
    }
  MatrixXcd full = c * weighted * c.transpose();
  return full.topLeftCorner(comp.n, comp.n).real();
}

Eigen::MatrixXd gamma_truncated(const CompanionForm& comp, const Eigen::MatrixXd& sigma,
                                double tail_tol, int max_terms) {
  const int n = comp.n;
  const double sigma_norm = sigma.norm();
  if (sigma_norm == 0.0) return MatrixXd::Zero(n, n);

  // walk the powers until the geometric closure certifies the absolute tail;
  // the bound tracks the full stacked power since a top block can vanish
  // while higher lags still act
  std::vector<MatrixXd> phis;
  phis.push_back(MatrixXd::Identity(n, n));
  MatrixXd pw = MatrixXd::Identity(comp.dim(), comp.dim());
  std::vector<double> norms{pw.norm()};
  double norm_sum = norms[0];
  const int window = 5;
  int decreasing = 0;
  int cutoff = -1;
  for (int j = 1; j <= max_terms; ++j) {
    pw = comp.a_star * pw;
    phis.push_back(pw.topLeftCorner(n, n));
    norms.push_back(pw.norm());
    norm_sum += norms.back();
    if (norms[j] == 0.0) {  // nilpotent dynamics: the sum is already exact
      cutoff = j;
      break;
    }
    if (norms[j] < norms[j - 1])
      ++decreasing;
    else
      decreasing = 0;
    if (j >= 10 && decreasing >= window) {
      double ratio = 0.0;
      for (int w = 0; w < window; ++w)
        ratio = std::max(ratio, norms[j - w] / norms[j - w - 1]);
      double tail = norms[j] * ratio / (1.0 - ratio);
      double bound = sigma_norm * tail * (norm_sum + tail);
      if (bound <= tail_tol) {
        cutoff = j;
        break;
      }
    }
  }
  if (cutoff < 0)
    fail(errc::tail_bound_not_reached,
         "double sum not certified to " + std::to_string(tail_tol) + " within " +
             std::to_string(max_terms) + " terms");

  // gamma = sum_{j1=1..Q} (sum_{j2=j1..Q} Phi_j2) sigma Phi_{j1-1}'
  MatrixXd suffix = MatrixXd::Zero(n, n);
  MatrixXd acc = MatrixXd::Zero(n, n);
  for (int j1 = cutoff; j1 >= 1; --j1) {
    suffix += phis[j1];
    acc += suffix * sigma * phis[j1 - 1].transpose();
  }
  return acc;
}

MomentSet limit_moments(const VarModel& model, const CompanionForm& comp,
                        const SpectralInfo& spec, const MomentOptions& opts) {
  if (!spec.stable)
    fail(errc::unstable_model, "largest stacked eigenvalue modulus is " +
                                   std::to_string(spec.max_modulus));
  const int n = model.n();
  MomentSet mom;

  MatrixXd lag_sum = MatrixXd::Zero(n, n);
  for (const auto& a : model.lags) lag_sum += a;
  mom.mu = (MatrixXd::Identity(n, n) - lag_sum).partialPivLu().solve(model.nu);

  mom.gamma0 = solve_companion_covariance(comp, model.sigma).topLeftCorner(n, n);
  mom.gamma = spec.distinct
                  ? gamma_eigen_form(comp, spec, model.sigma)
                  : gamma_truncated(comp, model.sigma, opts.tail_tol, opts.max_terms);

  mom.phi_cache.resize(opts.phi_cache_order + 1);
  mom.phi_cache[0] = MatrixXd::Identity(n, n);
  MatrixXd pw = MatrixXd::Identity(comp.dim(), comp.dim());
  for (int q = 1; q <= opts.phi_cache_order; ++q) {
    pw = comp.a_star * pw;
    mom.phi_cache[q] = pw.topLeftCorner(n, n);
  }
  return mom;
}

}  // namespace gordonvar
