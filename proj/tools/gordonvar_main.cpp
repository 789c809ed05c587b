#include <CLI11.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "gordonvar/errors.hpp"
#include "gordonvar/json_io.hpp"
#include "gordonvar/panel.hpp"
#include "gordonvar/simulation.hpp"
#include "gordonvar/valuation.hpp"
#include "gordonvar/var_model.hpp"

namespace {

using gordonvar::ordered_json;

ordered_json to_array(const Eigen::VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

ordered_json to_nested(const Eigen::MatrixXd& a) {
  ordered_json rows = ordered_json::array();
  for (int r = 0; r < a.rows(); ++r) {
    ordered_json row = ordered_json::array();
    for (int c = 0; c < a.cols(); ++c) row.push_back(a(r, c));
    rows.push_back(row);
  }
  return rows;
}

void emit_report(const ordered_json& rep, const std::string& out_path) {
  if (out_path.empty())
    std::cout << rep.dump(2) << "\n";
  else
    gordonvar::write_json_file(out_path, rep);
}

void write_trace(const std::string& path,
                 const std::vector<std::vector<double>>& trace) {
  std::ofstream out(path);
  if (!out) gordonvar::fail(gordonvar::errc::bad_file,
                            "cannot open '" + path + "' for writing");
  out << "company,q,term,partial_sum\n";
  char term_buf[40], partial_buf[40];
  for (size_t i = 0; i < trace.size(); ++i) {
    double partial = 0.0;
    for (size_t q = 0; q < trace[i].size(); ++q) {
      partial += trace[i][q];
      std::snprintf(term_buf, sizeof(term_buf), "%.17g", trace[i][q]);
      std::snprintf(partial_buf, sizeof(partial_buf), "%.17g", partial);
      out << i << ',' << (q + 1) << ',' << term_buf << ',' << partial_buf << '\n';
    }
  }
}

struct LoadedModel {
  gordonvar::VarModel model;
  gordonvar::CompanionForm comp;
  gordonvar::SelectorSet sel;
};

LoadedModel load(const std::string& model_path) {
  LoadedModel lm;
  lm.model = gordonvar::load_model(model_path);
  lm.comp = gordonvar::companion(lm.model);
  lm.sel = gordonvar::SelectorSet::for_layout(lm.model.m, lm.model.ell);
  return lm;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dividend-discount valuation under estimated joint rate dynamics"};
  app.require_subcommand(1);

  std::string panel_path, macro_path, model_path, context_path;
  std::string out_path, trace_path, context_out_path, frequency = "monthly";
  int lag_order = 1, horizon = 1, n_paths = 10000, threads = 0;
  int max_terms = 100000;
  double tol = 1e-10;
  std::uint64_t seed = 0;
  bool nested = false;

  auto* estimate = app.add_subcommand("estimate", "fit the rate dynamics from a panel");
  estimate->add_option("--panel", panel_path, "long-format price/dividend CSV")
      ->required();
  estimate->add_option("--macro", macro_path, "wide macro CSV on the same dates");
  estimate->add_option("--lags", lag_order, "autoregressive order");
  estimate->add_option("--frequency", frequency, "panel grid frequency");
  estimate->add_option("--out", out_path, "model file to write (stdout if absent)");
  estimate->add_option("--context-out", context_out_path,
                       "also save the end-of-sample forecast context");

  auto* check = app.add_subcommand("check", "evaluate the series convergence gates");
  check->add_option("--model", model_path, "model file")->required();
  check->add_option("--out", out_path, "report file (stdout if absent)");

  auto* value = app.add_subcommand("value", "price the discounted dividend streams");
  value->add_option("--model", model_path, "model file")->required();
  value->add_option("--context", context_path, "forecast context file")->required();
  value->add_option("--tol", tol, "relative series truncation target");
  value->add_option("--max-terms", max_terms, "series term budget");
  value->add_option("--trace", trace_path, "write every series term to this CSV");
  value->add_option("--out", out_path, "report file (stdout if absent)");

  auto* forecast = app.add_subcommand("forecast", "price forecasts at a horizon");
  forecast->add_option("--model", model_path, "model file")->required();
  forecast->add_option("--context", context_path, "forecast context file")->required();
  forecast->add_option("--horizon", horizon, "steps ahead");
  forecast->add_option("--tol", tol, "relative series truncation target");
  forecast->add_option("--max-terms", max_terms, "series term budget");
  forecast->add_option("--out", out_path, "report file (stdout if absent)");

  auto* irf = app.add_subcommand("irf", "price response to a current rate shock");
  irf->add_option("--model", model_path, "model file")->required();
  irf->add_option("--context", context_path, "forecast context file")->required();
  irf->add_option("--horizon", horizon, "steps ahead");
  irf->add_option("--out", out_path, "report file (stdout if absent)");

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo price ensemble");
  simulate->add_option("--model", model_path, "model file")->required();
  simulate->add_option("--context", context_path, "forecast context file")->required();
  simulate->add_option("--horizon", horizon, "steps ahead");
  simulate->add_option("--paths", n_paths, "ensemble size");
  simulate->add_option("--seed", seed, "root seed");
  simulate->add_option("--threads", threads, "worker threads (0 = auto)");
  simulate->add_option("--out", out_path, "report file (stdout if absent)");

  auto* compare = app.add_subcommand("compare",
                                     "forecast accuracy with and without the price");
  compare->add_option("--model", model_path, "model file")->required();
  compare->add_option("--context", context_path, "forecast context file")->required();
  compare->add_option("--horizon", horizon, "steps ahead");
  compare->add_option("--paths", n_paths, "ensemble size");
  compare->add_option("--seed", seed, "root seed");
  compare->add_option("--threads", threads, "worker threads (0 = auto)");
  compare->add_option("--tol", tol, "relative series truncation target");
  compare->add_option("--max-terms", max_terms, "series term budget");
  compare->add_flag("--nested", nested,
                    "draw the current price per path from the discounted stream");
  compare->add_option("--out", out_path, "report file (stdout if absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (app.got_subcommand(estimate)) {
      gordonvar::PanelSchema schema;
      schema.frequency = gordonvar::parse_frequency(frequency);
      auto panel = gordonvar::load_panel(panel_path, schema, macro_path);
      auto rates = gordonvar::compute_rates(panel);
      auto input = gordonvar::assemble_var_input(rates, panel);
      auto model = gordonvar::estimate_ols(input, lag_order);
      if (out_path.empty())
        std::cout << gordonvar::model_to_json(model).dump(2) << "\n";
      else
        gordonvar::save_model(out_path, model);
      if (!context_out_path.empty()) {
        Eigen::VectorXd last_prices =
            panel.prices.row(panel.prices.rows() - 1).transpose();
        auto ctx = gordonvar::make_context(model, input, rates, last_prices);
        gordonvar::save_context(context_out_path, ctx);
      }
      return 0;
    }

    if (app.got_subcommand(check)) {
      auto lm = load(model_path);
      auto spec = gordonvar::spectral(lm.comp);
      auto moments = gordonvar::limit_moments(lm.model, lm.comp, spec);
      auto gate = gordonvar::check_convergence(lm.model, moments, lm.sel);
      ordered_json rep;
      rep["convergence"] = {
          {"first_moment_lhs", to_array(gate.first_moment_lhs)},
          {"second_moment_lhs", to_nested(gate.second_moment_lhs)},
          {"all_first_ok", gate.all_first_ok()},
          {"all_second_ok", gate.all_second_ok()},
      };
      emit_report(rep, out_path);
      return 0;
    }

    auto lm = load(model_path);
    auto ctx = gordonvar::load_context(context_path, lm.model);

    if (app.got_subcommand(value)) {
      gordonvar::SeriesOptions cfg;
      cfg.tol = tol;
      cfg.max_terms = max_terms;
      cfg.record_trace = !trace_path.empty();
      auto result = gordonvar::theoretical_price(ctx, lm.model, lm.comp, lm.sel, cfg);
      gordonvar::SeriesOptions moment_cfg = cfg;
      moment_cfg.record_trace = false;
      ordered_json second = nullptr;  // stays null if the second-moment gate fails
      try {
        second = {{"matrix",
                   to_nested(gordonvar::second_moment_matrix(ctx, lm.model, lm.comp,
                                                             lm.sel, moment_cfg))}};
      } catch (const gordonvar::Error& e) {
        if (e.code() != gordonvar::errc::not_convergent) throw;
        std::cerr << "note: " << e.what() << "; second moments omitted\n";
      }
      if (!trace_path.empty()) write_trace(trace_path, result.trace);
      ordered_json rep;
      rep["prices"] = {
          {"value", to_array(result.price)},
          {"terms_used", result.terms_used},
          {"truncation_error_bound", to_array(result.truncation_error_bound)},
      };
      rep["second_moments"] = second;
      emit_report(rep, out_path);
      return 0;
    }

    if (app.got_subcommand(forecast)) {
      gordonvar::SeriesOptions cfg;
      cfg.tol = tol;
      cfg.max_terms = max_terms;
      auto anchored = gordonvar::price_forecast(ctx, lm.model, lm.comp, lm.sel, horizon);
      auto fundamental =
          gordonvar::fundamental_forecast(ctx, lm.model, lm.comp, lm.sel, horizon, cfg);
      ordered_json rep;
      rep["forecasts"] = {
          {"horizon", horizon},
          {"anchored", to_array(anchored)},
          {"fundamental", to_array(fundamental.price)},
      };
      emit_report(rep, out_path);
      return 0;
    }

    if (app.got_subcommand(irf)) {
      auto matrix = gordonvar::price_irf(ctx, lm.model, lm.comp, lm.sel, horizon);
      ordered_json rep;
      rep["irf"] = {{"horizon", horizon}, {"matrix", to_nested(matrix)}};
      emit_report(rep, out_path);
      return 0;
    }

    if (app.got_subcommand(simulate)) {
      gordonvar::SimulationOptions opts;
      opts.horizon = horizon;
      opts.n_paths = n_paths;
      opts.seed = seed;
      opts.threads = threads;
      auto summary = gordonvar::simulate_prices(ctx, lm.model, lm.comp, lm.sel, opts);
      ordered_json quantiles = {
          {"probs", gordonvar::SimulationSummary::quantile_probs()},
          {"values", to_nested(summary.quantiles)},
      };
      ordered_json rep;
      rep["simulation"] = {
          {"paths", opts.n_paths},
          {"seed", opts.seed},
          {"mean", to_array(summary.mean)},
          {"negativity_fraction", to_array(summary.negativity_fraction)},
          {"quantiles", quantiles},
      };
      emit_report(rep, out_path);
      return 0;
    }

    if (app.got_subcommand(compare)) {
      gordonvar::ComparisonOptions opts;
      opts.horizon = horizon;
      opts.n_paths = n_paths;
      opts.seed = seed;
      opts.threads = threads;
      opts.nested = nested;
      opts.series.tol = tol;
      opts.series.max_terms = max_terms;
      auto cmp =
          gordonvar::forecast_comparison(ctx, ctx, lm.model, lm.comp, lm.sel, opts);
      ordered_json rep;
      rep["comparison"] = {
          {"nested", cmp.nested},
          {"mse_f", to_array(cmp.mse_f)},
          {"mse_g", to_array(cmp.mse_g)},
          {"mean_f", to_array(cmp.mean_f)},
          {"mean_g", to_array(cmp.mean_g)},
          {"se_mean_g", to_array(cmp.se_mean_g)},
          {"se_mse_diff", to_array(cmp.se_mse_diff)},
      };
      emit_report(rep, out_path);
      return 0;
    }
  } catch (const gordonvar::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 4;
  }
  return 2;
}
