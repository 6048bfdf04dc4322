#pragma once

// File formats for the CLI: cause-coded dataset CSV, model/theta JSON
// configuration, fit-result JSON, and scenario output CSVs. All files are
// UTF-8 with LF line endings; doubles are written with 17 significant
// digits so read/write round-trips are bit-exact. Writes go through a
// temp-then-rename so no partial output survives a failure.

#include <filesystem>
#include <optional>
#include <string>

#include "mcmiss/estimation.hpp"
#include "mcmiss/simulation.hpp"
#include "mcmiss/types.hpp"

namespace mcmiss::io {

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct write_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string format_double(double v);  // %.17g, locale-independent

void atomic_write(const std::filesystem::path& path,
                  const std::string& content);

// ---- dataset CSV (header: id,y1,y2,m2; empty y2 field = missing) ----------

std::string dataset_to_csv(const Dataset& d);

// cause_count is max(m2) unless a larger declared count is supplied.
Dataset dataset_from_csv(const std::string& text,
                         std::optional<int> declared_causes = std::nullopt);

Dataset read_dataset(const std::filesystem::path& path,
                     std::optional<int> declared_causes = std::nullopt);
void write_dataset(const std::filesystem::path& path, const Dataset& d);

// ---- model / theta JSON ----------------------------------------------------

struct ModelConfig {
  ModelVariant model;
  std::optional<ThetaParams> theta;
  std::optional<LikelihoodKind> likelihood;
};

ModelConfig parse_model_config(const std::string& json_text);
ModelConfig read_model_config(const std::filesystem::path& path);

ThetaParams parse_theta(const std::string& json_text);
ThetaParams read_theta(const std::filesystem::path& path);

std::optional<LikelihoodKind> likelihood_kind_from_string(const std::string&);
std::string likelihood_kind_to_string(LikelihoodKind kind);

// ---- fit result JSON --------------------------------------------------------

std::string fit_result_to_json(const ModelVariant& model, const FitResult& fit);

struct LoadedFit {
  ModelVariant model;  // mechanisms carry the fitted parameter values
  ThetaParams theta;
  std::vector<bool> estimated;  // per cause rank
};

LoadedFit parse_fit_result(const std::string& json_text);
LoadedFit read_fit_result(const std::filesystem::path& path);

// ---- scenario outputs -------------------------------------------------------

// estimates.csv: rep,arm,parameter,estimate,converged
std::string scenario_estimates_csv(const ScenarioResult& result);
// rmse.csv: Table-style layout, absent parameters emitted as literal `x`.
std::string scenario_rmse_csv(const ScenarioResult& result);
// boxplot.csv: arm,parameter,estimate (converged replications only).
std::string scenario_boxplot_csv(const ScenarioResult& result);
// meta.json: scenario id, n, reps, seed, pattern proportions, exclusions.
std::string scenario_meta_json(const ScenarioResult& result);

}  // namespace mcmiss::io
