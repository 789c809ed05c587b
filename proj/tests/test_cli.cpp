#include <doctest.h>

#include <Eigen/Dense>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <json.hpp>
#include <sstream>
#include <string>

#include "gordonvar/errors.hpp"
#include "gordonvar/json_io.hpp"
#include "gordonvar/panel.hpp"
#include "gordonvar/var_model.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace gordonvar;
using Eigen::MatrixXd;
using Eigen::VectorXd;
namespace fs = std::filesystem;
using nlohmann::json;
using testutil::TwoCompanyFixture;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

struct Dataset {
  fs::path dir;
  fs::path panel_csv;
  fs::path macro_csv;
  VarModel truth;
  int periods = 0;
};

// Simulates the two-company model and lays the result out as the price and
// dividend histories the loader expects, plus the macro series on the same
// date grid.
Dataset make_dataset(const std::string& tag, int periods = 240) {
  Dataset ds;
  ds.dir = testutil::fresh_dir(tag);
  ds.panel_csv = ds.dir / "panel.csv";
  ds.macro_csv = ds.dir / "macro.csv";
  ds.periods = periods;

  TwoCompanyFixture fx;
  ds.truth = fx.model;
  MatrixXd rates = oracles::simulate_var_data(fx.model, periods, 321, 200);

  std::vector<Date> dates(periods + 1);
  dates[0] = Date{2001, 1, 31};
  for (int t = 1; t <= periods; ++t)
    dates[t] = advance(dates[t - 1], Frequency::monthly);

  Eigen::Vector2d price(20.0, 14.0), div(1.0, 1.0);
  std::ostringstream panel;
  panel << "date,company,price,dividend\n";
  const char* names[2] = {"AAA", "BBB"};
  for (int i = 0; i < 2; ++i)
    panel << to_string(dates[0]) << ',' << names[i] << ',' << fmt(price[i])
          << ',' << fmt(div[i]) << '\n';
  std::ostringstream macro;
  macro << "date,x\n" << to_string(dates[0]) << ",0\n";
  for (int t = 1; t <= periods; ++t) {
    for (int i = 0; i < 2; ++i) {
      div[i] *= std::exp(rates(t - 1, 2 + i));
      price[i] = std::exp(rates(t - 1, i)) * price[i] - div[i];
      panel << to_string(dates[t]) << ',' << names[i] << ',' << fmt(price[i])
            << ',' << fmt(div[i]) << '\n';
    }
    macro << to_string(dates[t]) << ',' << fmt(rates(t - 1, 4)) << '\n';
  }
  testutil::write_file(ds.panel_csv, panel.str());
  testutil::write_file(ds.macro_csv, macro.str());
  return ds;
}

json parse_file(const fs::path& p) { return json::parse(testutil::read_file(p)); }

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("estimate writes a model that matches the in-process fit") {
  auto ds = make_dataset("cli_estimate");
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";

  auto res = testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                               q(ds.macro_csv) + " --lags 1 --frequency monthly --out " +
                               q(model_path) + " --context-out " + q(ctx_path));
  REQUIRE(res.exit_code == 0);
  REQUIRE(fs::exists(model_path));
  REQUIRE(fs::exists(ctx_path));

  VarModel cli_model = load_model(model_path.string());
  CHECK(cli_model.m == 2);
  CHECK(cli_model.ell == 1);
  CHECK(cli_model.p() == 1);

  auto panel = load_panel(ds.panel_csv.string(), PanelSchema{}, ds.macro_csv.string());
  auto rates = compute_rates(panel);
  auto input = assemble_var_input(rates, panel);
  VarModel direct = estimate_ols(input, 1);
  CHECK((cli_model.nu - direct.nu).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cli_model.lags[0] - direct.lags[0]).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((cli_model.sigma - direct.sigma).cwiseAbs().maxCoeff() < 1e-12);

  // recovered dynamics sit near the generator
  CHECK((direct.lags[0] - ds.truth.lags[0]).cwiseAbs().maxCoeff() < 0.35);

  ForecastContext ctx = load_context(ctx_path.string(), cli_model);
  CHECK(ctx.state.size() == cli_model.n() * cli_model.p());
  CHECK(ctx.log_dividends_now.size() == 2);
  REQUIRE(ctx.prices_now.has_value());
  CHECK((*ctx.prices_now)[0] > 0.0);
}

TEST_CASE("check reports the gate and accepts a healthy model") {
  auto ds = make_dataset("cli_check");
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path report_path = ds.dir / "check.json";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);

  auto res = testutil::run_cli("check --model " + q(model_path) + " --out " +
                               q(report_path));
  CHECK(res.exit_code == 0);
  json rep = parse_file(report_path);
  REQUIRE(rep.contains("convergence"));
  auto& conv = rep["convergence"];
  CHECK(conv["first_moment_lhs"].size() == 2);
  CHECK(conv["second_moment_lhs"].size() == 2);
  CHECK(conv["all_first_ok"].get<bool>());
  CHECK(conv["all_second_ok"].get<bool>());
  for (auto& v : conv["first_moment_lhs"]) CHECK(v.get<double>() < 0.0);
}

TEST_CASE("value emits prices and second moments that dominate them") {
  auto ds = make_dataset("cli_value");
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path report_path = ds.dir / "value.json";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);

  auto res = testutil::run_cli("value --model " + q(model_path) + " --context " +
                               q(ctx_path) + " --out " + q(report_path));
  REQUIRE(res.exit_code == 0);
  json rep = parse_file(report_path);
  REQUIRE(rep.contains("prices"));
  REQUIRE(rep.contains("second_moments"));
  auto prices = rep["prices"]["value"].get<std::vector<double>>();
  REQUIRE(prices.size() == 2);
  auto second = rep["second_moments"]["matrix"];
  for (int i = 0; i < 2; ++i) {
    CHECK(prices[i] > 0.0);
    CHECK(second[i][i].get<double>() >= prices[i] * prices[i]);
  }
  CHECK(second[0][1].get<double>() ==
        doctest::Approx(second[1][0].get<double>()).epsilon(1e-8));
}

TEST_CASE("value can trace every series term to a file") {
  auto ds = make_dataset("cli_trace", 180);
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path report_path = ds.dir / "value.json";
  fs::path trace_path = ds.dir / "trace.csv";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);
  REQUIRE(testutil::run_cli("value --model " + q(model_path) + " --context " +
                            q(ctx_path) + " --out " + q(report_path) + " --trace " +
                            q(trace_path))
              .exit_code == 0);

  std::istringstream in(testutil::read_file(trace_path));
  std::string line;
  REQUIRE(std::getline(in, line));
  CHECK(line == "company,q,term,partial_sum");
  int rows = 0, last_company = -1, last_q = 0;
  double last_partial = 0.0;
  while (std::getline(in, line)) {
    std::istringstream row(line);
    std::string company, qs, term, partial;
    REQUIRE(std::getline(row, company, ','));
    REQUIRE(std::getline(row, qs, ','));
    REQUIRE(std::getline(row, term, ','));
    REQUIRE(std::getline(row, partial, ','));
    int ci = std::stoi(company), qi = std::stoi(qs);
    double tv = std::stod(term), pv = std::stod(partial);
    if (ci != last_company) {
      last_company = ci;
      last_q = 0;
      last_partial = 0.0;
    }
    CHECK(qi == last_q + 1);
    CHECK(tv > 0.0);
    CHECK(pv == doctest::Approx(last_partial + tv).epsilon(1e-12));
    last_q = qi;
    last_partial = pv;
    ++rows;
  }
  CHECK(rows > 20);
  CHECK(last_company == 1);
}

TEST_CASE("forecast reports both the anchored and dividend-anchored paths") {
  auto ds = make_dataset("cli_forecast", 180);
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path report_path = ds.dir / "forecast.json";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);
  auto res = testutil::run_cli("forecast --model " + q(model_path) + " --context " +
                               q(ctx_path) + " --horizon 6 --out " + q(report_path));
  REQUIRE(res.exit_code == 0);
  json rep = parse_file(report_path);
  REQUIRE(rep.contains("forecasts"));
  auto& fc = rep["forecasts"];
  CHECK(fc["horizon"].get<int>() == 6);
  auto anchored = fc["anchored"].get<std::vector<double>>();
  auto fundamental = fc["fundamental"].get<std::vector<double>>();
  REQUIRE(anchored.size() == 2);
  REQUIRE(fundamental.size() == 2);
  for (int i = 0; i < 2; ++i) {
    CHECK(std::isfinite(anchored[i]));
    CHECK(fundamental[i] > 0.0);
  }
}

TEST_CASE("irf emits one row per company and one column per variable") {
  auto ds = make_dataset("cli_irf", 180);
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path report_path = ds.dir / "irf.json";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);
  auto res = testutil::run_cli("irf --model " + q(model_path) + " --context " +
                               q(ctx_path) + " --horizon 4 --out " + q(report_path));
  REQUIRE(res.exit_code == 0);
  json rep = parse_file(report_path);
  REQUIRE(rep.contains("irf"));
  auto& irf = rep["irf"];
  CHECK(irf["horizon"].get<int>() == 4);
  auto mat = irf["matrix"];
  REQUIRE(mat.size() == 2);
  for (auto& row : mat) {
    REQUIRE(row.size() == 5);
    for (auto& v : row) CHECK(std::isfinite(v.get<double>()));
  }
}

TEST_CASE("simulate is byte-identical under a fixed seed") {
  auto ds = make_dataset("cli_simulate", 180);
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path rep1 = ds.dir / "sim1.json";
  fs::path rep2 = ds.dir / "sim2.json";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);
  std::string common = "simulate --model " + q(model_path) + " --context " +
                       q(ctx_path) + " --horizon 3 --paths 400 --seed 11 --out ";
  REQUIRE(testutil::run_cli(common + q(rep1)).exit_code == 0);
  REQUIRE(testutil::run_cli(common + q(rep2)).exit_code == 0);

  std::string body1 = testutil::read_file(rep1);
  CHECK(body1 == testutil::read_file(rep2));

  json rep = json::parse(body1);
  REQUIRE(rep.contains("simulation"));
  auto& sim = rep["simulation"];
  CHECK(sim["paths"].get<int>() == 400);
  CHECK(sim["seed"].get<std::uint64_t>() == 11);
  auto probs = sim["quantiles"]["probs"].get<std::vector<double>>();
  REQUIRE(probs.size() == 7);
  CHECK(probs.front() == 0.01);
  CHECK(probs.back() == 0.99);
  CHECK(sim["quantiles"]["values"].size() == 7);
  CHECK(sim["mean"].size() == 2);
  CHECK(sim["negativity_fraction"].size() == 2);
}

TEST_CASE("an explicit thread cap and the environment cap draw identically") {
  auto ds = make_dataset("cli_threads", 150);
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path rep1 = ds.dir / "sim1.json";
  fs::path rep2 = ds.dir / "sim2.json";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);
  REQUIRE(testutil::run_cli("simulate --model " + q(model_path) + " --context " +
                            q(ctx_path) +
                            " --horizon 2 --paths 300 --seed 4 --threads 1 --out " +
                            q(rep1))
              .exit_code == 0);
  setenv("GORDONVAR_THREADS", "3", 1);
  REQUIRE(testutil::run_cli("simulate --model " + q(model_path) + " --context " +
                            q(ctx_path) + " --horizon 2 --paths 300 --seed 4 --out " +
                            q(rep2))
              .exit_code == 0);
  unsetenv("GORDONVAR_THREADS");
  CHECK(testutil::read_file(rep1) == testutil::read_file(rep2));
}

TEST_CASE("compare reports the information ordering of the two forecasts") {
  auto ds = make_dataset("cli_compare", 180);
  fs::path model_path = ds.dir / "model.json";
  fs::path ctx_path = ds.dir / "context.json";
  fs::path report_path = ds.dir / "compare.json";

  REQUIRE(testutil::run_cli("estimate --panel " + q(ds.panel_csv) + " --macro " +
                            q(ds.macro_csv) + " --lags 1 --out " + q(model_path) +
                            " --context-out " + q(ctx_path))
              .exit_code == 0);
  auto res = testutil::run_cli("compare --model " + q(model_path) + " --context " +
                               q(ctx_path) +
                               " --horizon 2 --paths 2000 --seed 13 --out " +
                               q(report_path));
  REQUIRE(res.exit_code == 0);
  json rep = parse_file(report_path);
  REQUIRE(rep.contains("comparison"));
  auto& cmp = rep["comparison"];
  CHECK_FALSE(cmp["nested"].get<bool>());
  auto mse_f = cmp["mse_f"].get<std::vector<double>>();
  auto mse_g = cmp["mse_g"].get<std::vector<double>>();
  auto se = cmp["se_mse_diff"].get<std::vector<double>>();
  REQUIRE(mse_f.size() == 2);
  REQUIRE(mse_g.size() == 2);
  for (int i = 0; i < 2; ++i) CHECK(mse_g[i] <= mse_f[i] + 3.0 * se[i]);
  CHECK(cmp["mean_f"].size() == 2);
  CHECK(cmp["mean_g"].size() == 2);

  fs::path nested_path = ds.dir / "nested.json";
  REQUIRE(testutil::run_cli("compare --model " + q(model_path) + " --context " +
                            q(ctx_path) +
                            " --horizon 2 --paths 2000 --seed 13 --nested --out " +
                            q(nested_path))
              .exit_code == 0);
  CHECK(parse_file(nested_path)["comparison"]["nested"].get<bool>());
}

TEST_CASE("a unit-root model is refused with the model-state code") {
  auto dir = testutil::fresh_dir("cli_unstable");
  VarModel bad;
  bad.m = 1;
  bad.ell = 0;
  bad.nu = Eigen::Vector2d(0.05, 0.02);
  bad.lags = {Eigen::Matrix2d::Identity()};
  bad.sigma = 1e-4 * Eigen::Matrix2d::Identity();
  fs::path model_path = dir / "model.json";
  save_model(model_path.string(), bad);

  fs::path ctx_path = dir / "context.json";
  ForecastContext ctx;
  ctx.state = Eigen::Vector2d(0.05, 0.02);
  ctx.log_dividends_now = VectorXd::Zero(1);
  ctx.prices_now = VectorXd::Constant(1, 10.0);
  ctx.as_of = Date{2024, 1, 31};
  save_context(ctx_path.string(), ctx);

  fs::path rep = dir / "out.json";
  auto check_res = testutil::run_cli("check --model " + q(model_path) + " --out " + q(rep));
  CHECK(check_res.exit_code == 3);
  CHECK_FALSE(fs::exists(rep));
  auto value_res = testutil::run_cli("value --model " + q(model_path) + " --context " +
                                     q(ctx_path) + " --out " + q(rep));
  CHECK(value_res.exit_code == 3);
  CHECK_FALSE(fs::exists(rep));
  CHECK_FALSE(value_res.err.empty());
}

TEST_CASE("a nonconvergent model is a verdict for check but an error for value") {
  auto dir = testutil::fresh_dir("cli_nonconv");
  VarModel bad;
  bad.m = 1;
  bad.ell = 0;
  bad.nu = Eigen::Vector2d(std::log(1.05), std::log(1.10));  // growth above required
  bad.lags = {Eigen::Matrix2d::Zero()};
  bad.sigma = Eigen::Matrix2d::Zero();
  fs::path model_path = dir / "model.json";
  save_model(model_path.string(), bad);

  ForecastContext ctx;
  ctx.state = bad.nu;
  ctx.log_dividends_now = VectorXd::Zero(1);
  ctx.as_of = Date{2024, 1, 31};
  fs::path ctx_path = dir / "context.json";
  save_context(ctx_path.string(), ctx);

  fs::path rep = dir / "check.json";
  auto check_res = testutil::run_cli("check --model " + q(model_path) + " --out " + q(rep));
  CHECK(check_res.exit_code == 0);
  json body = parse_file(rep);
  CHECK_FALSE(body["convergence"]["all_first_ok"].get<bool>());

  fs::path vrep = dir / "value.json";
  auto value_res = testutil::run_cli("value --model " + q(model_path) + " --context " +
                                     q(ctx_path) + " --out " + q(vrep));
  CHECK(value_res.exit_code == 3);
  CHECK_FALSE(fs::exists(vrep));
}

TEST_CASE("input problems use the data exit code") {
  auto dir = testutil::fresh_dir("cli_baddata");

  auto missing = testutil::run_cli("estimate --panel " + q(dir / "nope.csv") +
                                   " --out " + q(dir / "m.json"));
  CHECK(missing.exit_code == 2);

  fs::path bad_cols = dir / "badcols.csv";
  testutil::write_file(bad_cols,
                       "date,ticker,price,dividend\n2024-01-31,A,10,1\n");
  auto badcol = testutil::run_cli("estimate --panel " + q(bad_cols) + " --out " +
                                  q(dir / "m.json"));
  CHECK(badcol.exit_code == 2);

  fs::path tiny = dir / "tiny.csv";
  testutil::write_file(tiny,
                       "date,company,price,dividend\n"
                       "2024-01-31,A,10,1\n"
                       "2024-02-29,A,10.5,1.01\n");
  auto short_res = testutil::run_cli("estimate --panel " + q(tiny) + " --lags 1 --out " +
                                     q(dir / "m.json"));
  CHECK(short_res.exit_code == 2);

  auto bad_flags = testutil::run_cli("value");
  CHECK(bad_flags.exit_code == 2);
}

TEST_CASE("an exhausted term budget uses the numerical exit code") {
  auto dir = testutil::fresh_dir("cli_budget");
  VarModel slow;
  slow.m = 1;
  slow.ell = 0;
  slow.nu = Eigen::Vector2d(0.08, 0.06);  // thin gap, hundreds of terms needed
  slow.lags = {Eigen::Matrix2d::Zero()};
  slow.sigma = Eigen::Matrix2d::Zero();
  fs::path model_path = dir / "model.json";
  save_model(model_path.string(), slow);

  ForecastContext ctx;
  ctx.state = slow.nu;
  ctx.log_dividends_now = VectorXd::Zero(1);
  ctx.as_of = Date{2024, 1, 31};
  fs::path ctx_path = dir / "context.json";
  save_context(ctx_path.string(), ctx);

  fs::path rep = dir / "value.json";
  auto res = testutil::run_cli("value --model " + q(model_path) + " --context " +
                               q(ctx_path) + " --max-terms 5 --out " + q(rep));
  CHECK(res.exit_code == 4);
  CHECK_FALSE(fs::exists(rep));
}

}  // TEST_SUITE cli
