#include "gordonvar/json_io.hpp"

#include <Eigen/Dense>
#include <fstream>
#include <string>
#include <vector>

#include "gordonvar/dates.hpp"
#include "gordonvar/errors.hpp"

namespace gordonvar {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

ordered_json vector_to_json(const VectorXd& v) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

ordered_json matrix_to_json(const MatrixXd& a) {
  ordered_json arr = ordered_json::array();
  for (int r = 0; r < a.rows(); ++r)
    for (int c = 0; c < a.cols(); ++c) arr.push_back(a(r, c));
  return arr;
}

VectorXd vector_from_json(const ordered_json& arr, int size, const std::string& key) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != size)
    fail(errc::bad_file, "field '" + key + "' must be an array of " +
                             std::to_string(size) + " numbers");
  VectorXd v(size);
  for (int i = 0; i < size; ++i) v(i) = arr[i].get<double>();
  return v;
}

MatrixXd matrix_from_json(const ordered_json& arr, int rows, int cols,
                          const std::string& key) {
  if (!arr.is_array() || static_cast<int>(arr.size()) != rows * cols)
    fail(errc::bad_file, "field '" + key + "' must be a row-major array of " +
                             std::to_string(rows * cols) + " numbers");
  MatrixXd a(rows, cols);
  int k = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) a(r, c) = arr[k++].get<double>();
  return a;
}

}  // namespace

ordered_json model_to_json(const VarModel& model) {
  ordered_json j;
  j["n"] = model.n();
  j["m"] = model.m;
  j["ell"] = model.ell;
  j["p"] = model.p();
  j["nu"] = vector_to_json(model.nu);
  ordered_json lags = ordered_json::array();
  for (const auto& a : model.lags) lags.push_back(matrix_to_json(a));
  j["lags"] = lags;
  j["sigma"] = matrix_to_json(model.sigma);
  return j;
}

VarModel model_from_json(const ordered_json& j) {
  try {
    VarModel model;
    model.m = j.at("m").get<int>();
    model.ell = j.at("ell").get<int>();
    const int n = j.at("n").get<int>();
    const int p = j.at("p").get<int>();
    if (n != model.n())
      fail(errc::bad_file, "model file says n=" + std::to_string(n) +
                               " but 2m+ell=" + std::to_string(model.n()));
    if (p < 1) fail(errc::bad_file, "model file needs at least one lag");
    model.nu = vector_from_json(j.at("nu"), n, "nu");
    const ordered_json& lags = j.at("lags");
    if (!lags.is_array() || static_cast<int>(lags.size()) != p)
      fail(errc::bad_file, "field 'lags' must hold p matrices");
    model.lags.resize(p);
    for (int u = 0; u < p; ++u)
      model.lags[u] = matrix_from_json(lags[u], n, n, "lags");
    model.sigma = matrix_from_json(j.at("sigma"), n, n, "sigma");
    model.validate();
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::bad_file, std::string("malformed model file: ") + e.what());
  }
}

void save_model(const std::string& path, const VarModel& model) {
  write_json_file(path, model_to_json(model));
}

VarModel load_model(const std::string& path) {
  return model_from_json(read_json_file(path));
}

ordered_json context_to_json(const ForecastContext& ctx) {
  ordered_json j;
  j["as_of"] = to_string(ctx.as_of);
  j["state"] = vector_to_json(ctx.state);
  j["log_dividends_now"] = vector_to_json(ctx.log_dividends_now);
  if (ctx.prices_now) j["prices_now"] = vector_to_json(*ctx.prices_now);
  return j;
}

ForecastContext context_from_json(const ordered_json& j, const VarModel& model) {
  try {
    ForecastContext ctx;
    ctx.as_of = parse_date(j.at("as_of").get<std::string>());
    ctx.state = vector_from_json(j.at("state"), model.n() * model.p(), "state");
    ctx.log_dividends_now =
        vector_from_json(j.at("log_dividends_now"), model.m, "log_dividends_now");
    if (j.contains("prices_now"))
      ctx.prices_now = vector_from_json(j.at("prices_now"), model.m, "prices_now");
    return ctx;
  } catch (const nlohmann::json::exception& e) {
    fail(errc::bad_file, std::string("malformed context file: ") + e.what());
  }
}

void save_context(const std::string& path, const ForecastContext& ctx) {
  write_json_file(path, context_to_json(ctx));
}

ForecastContext load_context(const std::string& path, const VarModel& model) {
  return context_from_json(read_json_file(path), model);
}

ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(errc::bad_file, "cannot open '" + path + "'");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    fail(errc::bad_file, "cannot parse '" + path + "': " + e.what());
  }
}

void write_json_file(const std::string& path, const ordered_json& j) {
  std::ofstream out(path);
  if (!out) fail(errc::bad_file, "cannot open '" + path + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) fail(errc::bad_file, "short write to '" + path + "'");
}

}  // namespace gordonvar
