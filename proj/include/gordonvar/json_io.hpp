#pragma once

#include <json.hpp>

#include <string>

#include "gordonvar/valuation.hpp"
#include "gordonvar/var_model.hpp"

namespace gordonvar {

using ordered_json = nlohmann::ordered_json;

// Model files: {"n", "m", "ell", "p", "nu", "lags", "sigma"} with matrices
// row-major. Values round-trip bit-identically.
ordered_json model_to_json(const VarModel& model);
VarModel model_from_json(const ordered_json& j);
void save_model(const std::string& path, const VarModel& model);
VarModel load_model(const std::string& path);

// Context files: {"as_of", "state", "log_dividends_now", "prices_now"?}.
ordered_json context_to_json(const ForecastContext& ctx);
ForecastContext context_from_json(const ordered_json& j, const VarModel& model);
void save_context(const std::string& path, const ForecastContext& ctx);
ForecastContext load_context(const std::string& path, const VarModel& model);

ordered_json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const ordered_json& j);

}  // namespace gordonvar
