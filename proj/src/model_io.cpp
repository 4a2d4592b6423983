#include "dybm/model_io.hpp"

#include <fstream>
#include <stdexcept>

namespace dybm {

namespace {

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (std::size_t j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& doc, std::size_t n, const char* what) {
  if (!doc.is_array() || doc.size() != n) {
    throw std::runtime_error(std::string("model_io: malformed matrix in ") + what);
  }
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!doc[i].is_array() || doc[i].size() != n) {
      throw std::runtime_error(std::string("model_io: malformed matrix row in ") + what);
    }
    for (std::size_t j = 0; j < n; ++j) m(i, j) = doc[i][j].get<double>();
  }
  return m;
}

}  // namespace

nlohmann::json mean_model_to_json(const MeanModelParams& params) {
  nlohmann::json doc;
  doc["N"] = params.dim;
  doc["d"] = params.lag;
  doc["lambdas"] = params.decay;
  doc["b"] = params.bias;
  nlohmann::json w = nlohmann::json::array();
  for (const Matrix& m : params.lag_weight) w.push_back(matrix_to_json(m));
  doc["W"] = std::move(w);
  nlohmann::json u = nlohmann::json::array();
  for (const Matrix& m : params.trace_weight) u.push_back(matrix_to_json(m));
  doc["U"] = std::move(u);
  doc["sigma"] = params.sigma;
  return doc;
}

MeanModelParams mean_model_from_json(const nlohmann::json& doc) {
  const std::size_t dim = doc.at("N").get<std::size_t>();
  const std::size_t lag = doc.at("d").get<std::size_t>();
  auto [params, state] = new_mean_model(dim, lag, doc.at("lambdas").get<std::vector<double>>());
  (void)state;

  const auto bias = doc.at("b").get<std::vector<double>>();
  if (bias.size() != dim) throw std::runtime_error("model_io: bias size mismatch");
  params.bias = bias;

  const nlohmann::json& w = doc.at("W");
  if (!w.is_array() || w.size() != lag - 1) {
    throw std::runtime_error("model_io: expected d-1 lag weight matrices");
  }
  for (std::size_t i = 0; i < w.size(); ++i) params.lag_weight[i] = matrix_from_json(w[i], dim, "W");

  const nlohmann::json& u = doc.at("U");
  if (!u.is_array() || u.size() != params.modes()) {
    throw std::runtime_error("model_io: expected one trace weight matrix per decay rate");
  }
  for (std::size_t k = 0; k < u.size(); ++k) {
    params.trace_weight[k] = matrix_from_json(u[k], dim, "U");
  }

  const auto sigma = doc.at("sigma").get<std::vector<double>>();
  if (sigma.size() != dim) throw std::runtime_error("model_io: sigma size mismatch");
  for (double s : sigma) {
    if (!(s > 0.0)) throw std::runtime_error("model_io: sigma must be positive");
  }
  params.sigma = sigma;
  return params;
}

void attach_ggd_block(nlohmann::json& doc, const std::vector<GgdParams>& dist,
                      std::size_t readjust_period) {
  std::vector<double> rho;
  std::vector<double> beta;
  for (const GgdParams& p : dist) {
    rho.push_back(p.rho);
    beta.push_back(p.beta);
  }
  doc["rho"] = rho;
  doc["beta"] = beta;
  doc["readjust_period"] = readjust_period;
}

std::optional<std::pair<std::vector<GgdParams>, std::size_t>> ggd_block_from_json(
    const nlohmann::json& doc) {
  if (!doc.contains("rho")) return std::nullopt;
  const auto rho = doc.at("rho").get<std::vector<double>>();
  const auto beta = doc.at("beta").get<std::vector<double>>();
  if (rho.size() != beta.size() || rho.empty()) {
    throw std::runtime_error("model_io: rho/beta size mismatch");
  }
  std::vector<GgdParams> dist;
  dist.reserve(rho.size());
  for (std::size_t j = 0; j < rho.size(); ++j) {
    if (!(rho[j] > 0.0) || !(beta[j] > 0.0)) {
      throw std::runtime_error("model_io: rho and beta must be positive");
    }
    dist.push_back(GgdParams{rho[j], beta[j]});
  }
  const std::size_t period = doc.value("readjust_period", std::size_t{100});
  return std::make_pair(std::move(dist), period);
}

nlohmann::json var_model_to_json(const VarModelParams& params) {
  nlohmann::json doc;
  doc["d"] = params.lag();
  doc["k"] = params.modes();
  doc["lambdas"] = params.lambda;
  doc["v0"] = params.v0;
  doc["w"] = params.w;
  doc["u"] = params.u;
  return doc;
}

VarModelParams var_model_from_json(const nlohmann::json& doc) {
  VarModelParams params;
  params.v0 = doc.at("v0").get<double>();
  params.w = doc.at("w").get<std::vector<double>>();
  params.u = doc.at("u").get<std::vector<double>>();
  params.lambda = doc.at("lambdas").get<std::vector<double>>();
  if (doc.at("d").get<std::size_t>() != params.lag() ||
      doc.at("k").get<std::size_t>() != params.modes()) {
    throw std::runtime_error("model_io: d/k inconsistent with w/u lengths");
  }
  validate_var_params(params);
  return params;
}

nlohmann::json garch_to_json(const GarchParams& params) {
  nlohmann::json doc;
  doc["p"] = params.p();
  doc["q"] = params.q();
  doc["a0"] = params.a0;
  doc["a"] = params.a;
  doc["b"] = params.b;
  return doc;
}

GarchParams garch_from_json(const nlohmann::json& doc) {
  GarchParams params;
  params.a0 = doc.at("a0").get<double>();
  params.a = doc.at("a").get<std::vector<double>>();
  params.b = doc.at("b").get<std::vector<double>>();
  if (doc.at("p").get<std::size_t>() != params.p() ||
      doc.at("q").get<std::size_t>() != params.q()) {
    throw std::runtime_error("model_io: p/q inconsistent with a/b lengths");
  }
  validate_garch_params(params);
  return params;
}

void save_json(const nlohmann::json& doc, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_json: cannot open '" + path + "' for writing");
  out << doc.dump(2) << '\n';
  if (!out) throw std::runtime_error("save_json: write failed for '" + path + "'");
}

nlohmann::json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_json: cannot open '" + path + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw std::runtime_error("load_json: '" + path + "': " + e.what());
  }
  return doc;
}

}  // namespace dybm
