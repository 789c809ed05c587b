#pragma once

#include <stdexcept>
#include <string>

namespace gordonvar {

// Failure taxonomy. The CLI maps groups onto exit codes: data and usage
// problems exit 2, model-state refusals exit 3, numerical breakdowns exit 4.
enum class errc {
  // data / usage
  missing_column,
  non_positive_price,
  non_positive_dividend,
  duplicate_date,
  frequency_gap,
  length_mismatch,
  insufficient_data,
  missing_prices,
  horizon_zero,
  bad_file,
  bad_argument,
  // model state
  unstable_model,
  not_convergent,
  // numerical
  singular_regressors,
  eigen_solver_failure,
  tail_bound_not_reached,
  non_psd_sigma,
};

class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  errc code() const noexcept { return code_; }

  int exit_code() const noexcept {
    switch (code_) {
      case errc::unstable_model:
      case errc::not_convergent:
        return 3;
      case errc::singular_regressors:
      case errc::eigen_solver_failure:
      case errc::tail_bound_not_reached:
      case errc::non_psd_sigma:
        return 4;
      default:
        return 2;
    }
  }

 private:
  errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) {
  throw Error(code, what);
}

}  // namespace gordonvar
