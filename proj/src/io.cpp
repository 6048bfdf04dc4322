#include "mcmiss/io.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

namespace mcmiss::io {

using nlohmann::json;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void atomic_write(const std::filesystem::path& path,
                  const std::string& content) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw write_error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw write_error("short write to " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw write_error("cannot rename into " + path.string());
  }
}

// ---- dataset CSV ------------------------------------------------------------

std::string dataset_to_csv(const Dataset& d) {
  std::string out = "id,y1,y2,m2\n";
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const Observation& r = d.records[i];
    out += std::to_string(i);
    out += ',';
    out += format_double(r.y1);
    out += ',';
    if (r.y2) out += format_double(*r.y2);
    out += ',';
    out += std::to_string(r.m2);
    out += '\n';
  }
  return out;
}

namespace {

double parse_strict_double(const std::string& field, std::size_t line) {
  errno = 0;
  char* end = nullptr;
  const double v = std::strtod(field.c_str(), &end);
  if (end != field.c_str() + field.size() || field.empty() || errno == ERANGE)
    throw parse_error("line " + std::to_string(line) +
                      ": malformed numeric field '" + field + "'");
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (const char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(cur);
  return fields;
}

}  // namespace

Dataset dataset_from_csv(const std::string& text,
                         std::optional<int> declared_causes) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw parse_error("empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "id,y1,y2,m2")
    throw parse_error("dataset header must be exactly 'id,y1,y2,m2'");

  Dataset d;
  int max_code = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 4)
      throw parse_error("line " + std::to_string(lineno) +
                        ": expected 4 fields, found " +
                        std::to_string(fields.size()));
    Observation rec;
    rec.y1 = parse_strict_double(fields[1], lineno);
    if (!fields[2].empty())
      rec.y2 = parse_strict_double(fields[2], lineno);
    const double m2 = parse_strict_double(fields[3], lineno);
    rec.m2 = static_cast<int>(m2);
    if (static_cast<double>(rec.m2) != m2 || rec.m2 < 0)
      throw parse_error("line " + std::to_string(lineno) +
                        ": m2 must be a nonnegative integer");
    max_code = std::max(max_code, rec.m2);
    d.records.push_back(std::move(rec));
  }
  d.cause_count = std::max(max_code, declared_causes.value_or(0));
  return d;
}

Dataset read_dataset(const std::filesystem::path& path,
                     std::optional<int> declared_causes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return dataset_from_csv(buf.str(), declared_causes);
}

void write_dataset(const std::filesystem::path& path, const Dataset& d) {
  atomic_write(path, dataset_to_csv(d));
}

// ---- model / theta JSON -------------------------------------------------------

std::optional<LikelihoodKind> likelihood_kind_from_string(
    const std::string& s) {
  if (s == "full") return LikelihoodKind::full;
  if (s == "semi-direct" || s == "semi_direct") return LikelihoodKind::semi_direct;
  if (s == "direct") return LikelihoodKind::direct;
  return std::nullopt;
}

std::string likelihood_kind_to_string(LikelihoodKind kind) {
  switch (kind) {
    case LikelihoodKind::full: return "full";
    case LikelihoodKind::semi_direct: return "semi-direct";
    case LikelihoodKind::direct: return "direct";
    case LikelihoodKind::merged_full: return "merged-full";
  }
  return "full";
}

namespace {

double require_number(const json& j, const std::string& field) {
  if (!j.contains(field) || !j[field].is_number())
    throw parse_error("field '" + field + "' missing or not a number");
  return j[field].get<double>();
}

ThetaParams theta_from_json(const json& j) {
  try {
    return ThetaParams(require_number(j, "mu1"), require_number(j, "mu2"),
                       require_number(j, "sigma1"),
                       require_number(j, "sigma2"), require_number(j, "rho"));
  } catch (const std::invalid_argument& e) {
    throw parse_error(std::string("invalid theta: ") + e.what());
  }
}

json theta_to_json(const ThetaParams& t) {
  return json{{"mu1", t.mu1()},       {"mu2", t.mu2()},
              {"sigma1", t.sigma1()}, {"sigma2", t.sigma2()},
              {"rho", t.rho()}};
}

CauseMechanismSpec mechanism_from_json(const json& j) {
  if (!j.contains("variant") || !j["variant"].is_string())
    throw parse_error("cause field 'variant' missing or not a string");
  const std::string variant = j["variant"].get<std::string>();
  if (variant == "mcar") {
    const double p = require_number(j, "p");
    if (!(p > 0.0 && p < 1.0))
      throw parse_error("field 'p' must lie strictly between 0 and 1");
    return Mcar{p};
  }
  if (variant == "mar_logistic_centered")
    return MarLogisticCentered{require_number(j, "tau_a"),
                               require_number(j, "tau_b")};
  if (variant == "mar_logistic_affine")
    return MarLogisticAffine{require_number(j, "tau_a"),
                             require_number(j, "tau_b")};
  if (variant == "nmar_logistic_centered")
    return NmarLogisticCentered{require_number(j, "tau_a"),
                                require_number(j, "tau_b")};
  throw parse_error("unknown mechanism variant '" + variant + "'");
}

json mechanism_to_json(const CauseMechanismSpec& m) {
  if (const auto* mc = std::get_if<Mcar>(&m))
    return json{{"variant", "mcar"}, {"p", mc->p}};
  if (const auto* c = std::get_if<MarLogisticCentered>(&m))
    return json{{"variant", "mar_logistic_centered"},
                {"tau_a", c->tau_a},
                {"tau_b", c->tau_b}};
  if (const auto* a = std::get_if<MarLogisticAffine>(&m))
    return json{{"variant", "mar_logistic_affine"},
                {"tau_a", a->tau_a},
                {"tau_b", a->tau_b}};
  const auto& nm = std::get<NmarLogisticCentered>(m);
  return json{{"variant", "nmar_logistic_centered"},
              {"tau_a", nm.tau_a},
              {"tau_b", nm.tau_b}};
}

ModelVariant model_from_json(const json& j) {
  if (!j.contains("causes") || !j["causes"].is_array() || j["causes"].empty())
    throw parse_error("field 'causes' missing or not a nonempty array");
  std::string structure = "hierarchical";
  if (j.contains("structure")) {
    if (!j["structure"].is_string())
      throw parse_error("field 'structure' must be a string");
    structure = j["structure"].get<std::string>();
    if (structure != "hierarchical" && structure != "flat")
      throw parse_error("field 'structure' must be 'hierarchical' or 'flat'");
  }

  struct Parsed {
    int priority;
    CauseEntry entry;
  };
  std::vector<Parsed> parsed;
  for (const json& cj : j["causes"]) {
    if (!cj.contains("code") || !cj["code"].is_number_integer())
      throw parse_error("cause field 'code' missing or not an integer");
    Parsed p{0, {cj["code"].get<int>(), mechanism_from_json(cj)}};
    p.priority = cj.contains("priority") && cj["priority"].is_number_integer()
                     ? cj["priority"].get<int>()
                     : p.entry.code;
    parsed.push_back(std::move(p));
  }
  std::stable_sort(parsed.begin(), parsed.end(),
                   [](const Parsed& a, const Parsed& b) {
                     return a.priority < b.priority;
                   });
  std::vector<CauseEntry> causes;
  for (auto& p : parsed) causes.push_back(std::move(p.entry));
  try {
    if (structure == "flat") return ModelVariant(FlatModel(std::move(causes)));
    return ModelVariant(HierarchicalModel(std::move(causes)));
  } catch (const std::invalid_argument& e) {
    throw parse_error(std::string("invalid field 'causes': ") + e.what());
  }
}

json parse_json_text(const std::string& text) {
  json j = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw parse_error("malformed JSON document");
  return j;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

ModelConfig parse_model_config(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  ModelConfig config{model_from_json(j), std::nullopt, std::nullopt};
  if (j.contains("theta")) config.theta = theta_from_json(j["theta"]);
  if (j.contains("likelihood")) {
    if (!j["likelihood"].is_string())
      throw parse_error("field 'likelihood' must be a string");
    const auto kind = likelihood_kind_from_string(j["likelihood"].get<std::string>());
    if (!kind)
      throw parse_error(
          "field 'likelihood' must be 'full', 'semi-direct', or 'direct'");
    config.likelihood = kind;
  }
  return config;
}

ModelConfig read_model_config(const std::filesystem::path& path) {
  return parse_model_config(slurp(path));
}

ThetaParams parse_theta(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  // Accept either a bare theta block or a document with a theta field.
  return theta_from_json(j.contains("theta") ? j["theta"] : j);
}

ThetaParams read_theta(const std::filesystem::path& path) {
  return parse_theta(slurp(path));
}

// ---- fit result JSON ----------------------------------------------------------

std::string fit_result_to_json(const ModelVariant& model,
                               const FitResult& fit) {
  json j;
  j["likelihood"] = likelihood_kind_to_string(fit.kind);
  j["loglik"] = fit.loglik;
  j["converged"] = fit.converged;
  j["iterations"] = fit.iterations;
  j["evaluations"] = fit.diag.evaluations;
  j["theta"] = theta_to_json(fit.xi_hat.theta);
  j["structure"] =
      std::holds_alternative<HierarchicalModel>(model) ? "hierarchical" : "flat";

  const ParamTransform transform(model, fit.kind);
  const auto causes = model_causes(model);
  json jcauses = json::array();
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    json cj = mechanism_to_json(fit.xi_hat.taus[rank]);
    cj["code"] = causes[rank].code;
    cj["priority"] = static_cast<int>(rank + 1);
    cj["estimated"] = transform.cause_estimated(rank);
    jcauses.push_back(std::move(cj));
  }
  j["causes"] = std::move(jcauses);

  if (fit.hessian) {
    json h;
    h["eigenvalues"] = fit.hessian->eigenvalues;
    h["min_eigenvalue"] = fit.hessian->min_eigenvalue;
    h["max_eigenvalue"] = fit.hessian->max_eigenvalue;
    h["condition_number"] = fit.hessian->condition_number;
    h["finite"] = fit.hessian->finite;
    h["weakly_identified"] = fit.hessian->weakly_identified;
    j["hessian"] = std::move(h);
  }
  return j.dump(2) + "\n";
}

LoadedFit parse_fit_result(const std::string& json_text) {
  const json j = parse_json_text(json_text);
  if (!j.contains("theta")) throw parse_error("fit file: missing 'theta'");
  const ThetaParams theta = theta_from_json(j["theta"]);
  const ModelVariant model = model_from_json(j);
  std::vector<bool> estimated;
  for (const json& cj : j["causes"])
    estimated.push_back(cj.contains("estimated") && cj["estimated"].is_boolean()
                            ? cj["estimated"].get<bool>()
                            : true);
  return LoadedFit{model, theta, std::move(estimated)};
}

LoadedFit read_fit_result(const std::filesystem::path& path) {
  return parse_fit_result(slurp(path));
}

// ---- scenario outputs -----------------------------------------------------------

std::string scenario_estimates_csv(const ScenarioResult& result) {
  std::string out = "rep,arm,parameter,estimate,converged\n";
  for (const EstimateRecord& r : result.estimates) {
    out += std::to_string(r.rep);
    out += ',';
    out += r.arm;
    out += ',';
    out += r.parameter;
    out += ',';
    out += format_double(r.estimate);
    out += ',';
    out += r.converged ? '1' : '0';
    out += '\n';
  }
  return out;
}

std::string scenario_rmse_csv(const ScenarioResult& result) {
  std::string out = "arm";
  for (const std::string& col : scenario_parameter_columns()) {
    out += ',';
    out += col;
  }
  out += '\n';
  for (const ArmRmse& row : result.rmse_table) {
    out += row.arm;
    for (const std::string& col : scenario_parameter_columns()) {
      out += ',';
      const auto it = row.by_parameter.find(col);
      if (it != row.by_parameter.end() && it->second)
        out += format_double(*it->second);
      else
        out += 'x';
    }
    out += '\n';
  }
  return out;
}

std::string scenario_boxplot_csv(const ScenarioResult& result) {
  std::string out = "arm,parameter,estimate\n";
  for (const EstimateRecord& r : result.estimates) {
    if (!r.converged) continue;
    out += r.arm;
    out += ',';
    out += r.parameter;
    out += ',';
    out += format_double(r.estimate);
    out += '\n';
  }
  return out;
}

std::string scenario_meta_json(const ScenarioResult& result) {
  json j;
  j["scenario"] = result.spec.id;
  j["n"] = result.spec.n;
  j["reps"] = result.spec.reps;
  j["seed"] = result.spec.seed;
  j["mean_pattern_proportions"] = result.mean_pattern_props;
  j["excluded_replications"] = result.excluded_reps;
  j["converged_replications"] = result.converged_reps;
  j["arms"] = json::array({result.spec.known_arm_label,
                           result.spec.unknown_arm_label});
  return j.dump(2) + "\n";
}

}  // namespace mcmiss::io
