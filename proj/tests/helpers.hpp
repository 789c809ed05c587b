#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "gordonvar/valuation.hpp"
#include "gordonvar/var_model.hpp"

#ifndef GORDONVAR_CLI_PATH
#define GORDONVAR_CLI_PATH "gordonvar"
#endif

namespace testutil {

inline std::filesystem::path fresh_dir(const std::string& tag) {
  auto dir = std::filesystem::temp_directory_path() /
             ("gordonvar_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& body) {
  std::ofstream out(path);
  out << body;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

struct CliResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

// Runs the built CLI with the given arguments, capturing both streams.
inline CliResult run_cli(const std::string& args) {
  static int counter = 0;
  auto dir = fresh_dir("cli_io");
  auto out_path = dir / ("out" + std::to_string(counter));
  auto err_path = dir / ("err" + std::to_string(counter));
  ++counter;
  std::string cmd = std::string(GORDONVAR_CLI_PATH) + " " + args + " > " +
                    out_path.string() + " 2> " + err_path.string();
  int rc = std::system(cmd.c_str());
  CliResult res;
  res.exit_code = (rc == -1) ? -1 : WEXITSTATUS(rc);
  res.out = read_file(out_path);
  res.err = read_file(err_path);
  return res;
}

// Single company, no macro block, noise off: required return 10%, growth 5%,
// current dividend 1. The discounted stream sums to 21 and the one-step
// forecast from a price of 21 is 22.05.
struct GordonFixture {
  gordonvar::VarModel model;
  gordonvar::ForecastContext ctx;

  GordonFixture(double k_log = std::log(1.1), double g_log = std::log(1.05)) {
    model.m = 1;
    model.ell = 0;
    model.nu = Eigen::Vector2d(k_log, g_log);
    model.lags = {Eigen::Matrix2d::Zero()};
    model.sigma = Eigen::Matrix2d::Zero();
    ctx.state = Eigen::Vector2d(k_log, g_log);
    ctx.log_dividends_now = Eigen::VectorXd::Zero(1);
    ctx.prices_now = Eigen::VectorXd::Constant(1, 21.0);
    ctx.as_of = gordonvar::Date{2024, 1, 1};
  }
};

// Single company with persistent noisy rates: diagonal lag 0.2, innovation
// sd 0.05 on both rate components, mean gap 0.06. Comfortably convergent.
struct NoisyFixture {
  gordonvar::VarModel model;
  gordonvar::ForecastContext ctx;

  NoisyFixture(double a = 0.2, double sd = 0.05, double mean_k = 0.08,
               double mean_g = 0.02) {
    model.m = 1;
    model.ell = 0;
    model.lags = {Eigen::Matrix2d(Eigen::Vector2d(a, a).asDiagonal())};
    model.nu = (1.0 - a) * Eigen::Vector2d(mean_k, mean_g);
    model.sigma = sd * sd * Eigen::Matrix2d::Identity();
    ctx.state = Eigen::Vector2d(mean_k, mean_g);
    ctx.log_dividends_now = Eigen::VectorXd::Zero(1);
    ctx.prices_now = Eigen::VectorXd::Constant(1, 15.0);
    ctx.as_of = gordonvar::Date{2024, 1, 1};
  }
};

// Two companies plus one macro covariate, lightly cross-correlated, stable
// and convergent with margin. The workhorse stochastic fixture.
struct TwoCompanyFixture {
  gordonvar::VarModel model;
  gordonvar::ForecastContext ctx;

  TwoCompanyFixture() {
    const int n = 5;
    model.m = 2;
    model.ell = 1;
    Eigen::MatrixXd a(n, n);
    // rows: required x2, growth x2, macro; mild persistence, small spillovers
    a << 0.30, 0.02, 0.01, 0.00, 0.05,
         0.03, 0.25, 0.00, 0.02, 0.04,
         0.01, 0.00, 0.20, 0.02, 0.03,
         0.00, 0.01, 0.03, 0.15, 0.02,
         0.02, 0.02, 0.01, 0.01, 0.50;
    model.lags = {a};
    Eigen::VectorXd mu(n);
    mu << 0.10, 0.09, 0.025, 0.02, 0.0;
    model.nu = (Eigen::MatrixXd::Identity(n, n) - a) * mu;
    Eigen::MatrixXd c(n, n);
    c << 0.030, 0.006, 0.002, 0.001, 0.002,
         0.006, 0.028, 0.001, 0.002, 0.002,
         0.002, 0.001, 0.020, 0.004, 0.001,
         0.001, 0.002, 0.004, 0.018, 0.001,
         0.002, 0.002, 0.001, 0.001, 0.010;
    model.sigma = c * c.transpose();  // PSD by construction, sds ~ 1-3%
    ctx.state = mu;
    ctx.log_dividends_now = Eigen::Vector2d(0.0, std::log(0.8));
    ctx.prices_now = Eigen::Vector2d(16.0, 11.0);
    ctx.as_of = gordonvar::Date{2024, 1, 1};
  }
};

}  // namespace testutil
