#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "dybm/ggd.hpp"
#include "dybm/mean_model.hpp"
#include "dybm/variance.hpp"

namespace dybm {

/// Mean model document: {N, d, lambdas[], b[], W[][][], U[][][], sigma[]}.
/// State is not serialized; it is rebuilt by replaying a series.
nlohmann::json mean_model_to_json(const MeanModelParams& params);
MeanModelParams mean_model_from_json(const nlohmann::json& doc);

/// Optional per-dimension noise block inside the mean model document:
/// {rho[], beta[], readjust_period}.
void attach_ggd_block(nlohmann::json& doc, const std::vector<GgdParams>& dist,
                      std::size_t readjust_period);
std::optional<std::pair<std::vector<GgdParams>, std::size_t>> ggd_block_from_json(
    const nlohmann::json& doc);

/// Variance model document: {d, k, lambdas[], v0, w[], u[]}.
nlohmann::json var_model_to_json(const VarModelParams& params);
VarModelParams var_model_from_json(const nlohmann::json& doc);

/// GARCH document: {p, q, a0, a[], b[]}.
nlohmann::json garch_to_json(const GarchParams& params);
GarchParams garch_from_json(const nlohmann::json& doc);

void save_json(const nlohmann::json& doc, const std::string& path);
nlohmann::json load_json(const std::string& path);

}  // namespace dybm
