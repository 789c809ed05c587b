#pragma once

#include <Eigen/Dense>
#include <vector>

#include "gordonvar/panel.hpp"

namespace gordonvar {

// y_t = nu + A_1 y_{t-1} + ... + A_p y_{t-p} + xi_t, xi_t ~ N(0, sigma),
// with y laid out as [log_required (m) | log_growth (m) | macro (ell)].
struct VarModel {
  int m = 0;    // companies
  int ell = 0;  // macro covariates
  Eigen::VectorXd nu;                 // n
  std::vector<Eigen::MatrixXd> lags;  // p matrices, n x n each
  Eigen::MatrixXd sigma;              // n x n, symmetric PSD

  int n() const { return 2 * m + ell; }
  int p() const { return static_cast<int>(lags.size()); }

  // Sizes, symmetry within 1e-12, no negative sigma eigenvalues.
  void validate() const;
};

// Stacked first-order form. The state is (y_t', y_{t-1}', ..., y_{t-p+1}')'.
struct CompanionForm {
  Eigen::MatrixXd a_star;   // np x np: coefficient blocks on top, shifted
                            // identities below
  Eigen::VectorXd nu_star;  // np, intercept in the first block
  int n = 0;
  int p = 0;

  int dim() const { return n * p; }
  Eigen::MatrixXd selector() const;  // J = [I_n 0 ... 0], n x np
};

struct SpectralOptions {
  double stability_margin = 1e-8;
  double distinctness_tol = 1e-7;
};

struct SpectralInfo {
  Eigen::VectorXcd eigenvalues;   // sorted by modulus, descending
  Eigen::MatrixXcd eigenvectors;  // columns aligned with eigenvalues
  double max_modulus = 0.0;
  bool distinct = false;  // min pairwise eigenvalue gap above tolerance
  bool stable = false;    // max_modulus < 1 - stability_margin
};

// Long-run quantities of a stable model: the unconditional mean and
// covariance of y_t, and the one-sided cross-lag mass
// gamma = sum_{j1>=1} sum_{j2>=j1} Phi_{j2} sigma Phi_{j1-1}'.
struct MomentSet {
  Eigen::VectorXd mu;      // n
  Eigen::MatrixXd gamma0;  // n x n, symmetric PSD
  Eigen::MatrixXd gamma;   // n x n
  std::vector<Eigen::MatrixXd> phi_cache;  // Phi_0 .. Phi_Q
};

struct MomentOptions {
  double tail_tol = 1e-12;  // absolute accuracy the truncated gamma route
                            // must certify
  int max_terms = 100000;
  int phi_cache_order = 32;
  SpectralOptions spectral;
};

// Equation-wise least squares with intercept. Residual covariance uses the
// divisor T - p - np - 1 and is clamped to the nearest symmetric PSD matrix.
VarModel estimate_ols(const VarInput& input, int lag_order);

CompanionForm companion(const VarModel& model);

SpectralInfo spectral(const CompanionForm& comp, const SpectralOptions& opts = {});

// Phi_q = J (A*)^q J', the moving-average weight at lag q.
Eigen::MatrixXd phi(const CompanionForm& comp, int q);

// E(y_{t+horizon} | state) = sum_{q=1..horizon} Phi_{horizon-q} nu + J (A*)^horizon state.
Eigen::VectorXd conditional_mean(const VarModel& model, const CompanionForm& comp,
                                 const Eigen::VectorXd& state, int horizon);

// Cov(y_{t+j1}, y_{t+j2} | state) = sum_{q=1..min(j1,j2)} Phi_{j1-q} sigma Phi_{j2-q}'.
Eigen::MatrixXd conditional_cov(const VarModel& model, const CompanionForm& comp,
                                int j1, int j2);

// Requires spec.stable. gamma takes the eigen closed form when the spectrum
// is distinct and the truncated double summation otherwise.
MomentSet limit_moments(const VarModel& model, const CompanionForm& comp,
                        const SpectralInfo& spec, const MomentOptions& opts = {});

// The individual routes, callable separately so they can be cross-checked.

// V = A* V A*' + J' sigma J solved for the companion state; gamma0 = J V J'.
Eigen::MatrixXd solve_companion_covariance(const CompanionForm& comp,
                                           const Eigen::MatrixXd& sigma);

// gamma = J C (G .* L) C' J' with G = C^-1 J' sigma J C'^-1 and
// L_ab = lambda_a / ((1 - lambda_a)(1 - lambda_a lambda_b)).
Eigen::MatrixXd gamma_eigen_form(const CompanionForm& comp, const SpectralInfo& spec,
                                 const Eigen::MatrixXd& sigma);

// Literal double sum, truncated once the geometric tail bound certifies
// tail_tol absolute accuracy.
Eigen::MatrixXd gamma_truncated(const CompanionForm& comp, const Eigen::MatrixXd& sigma,
                                double tail_tol, int max_terms);

}  // namespace gordonvar
