#include "mcmiss/types.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace mcmiss {

ThetaParams::ThetaParams(double mu1, double mu2, double sigma1, double sigma2,
                         double rho)
    : mu1_(mu1), mu2_(mu2), sigma1_(sigma1), sigma2_(sigma2), rho_(rho) {
  if (!(std::isfinite(mu1) && std::isfinite(mu2)))
    throw std::invalid_argument("ThetaParams: non-finite mean");
  if (!(sigma1 > 0.0) || !std::isfinite(sigma1))
    throw std::invalid_argument("ThetaParams: sigma1 must be positive");
  if (!(sigma2 > 0.0) || !std::isfinite(sigma2))
    throw std::invalid_argument("ThetaParams: sigma2 must be positive");
  if (!(rho > -1.0 && rho < 1.0))
    throw std::invalid_argument("ThetaParams: rho must lie in (-1, 1)");
}

namespace {

std::vector<CauseEntry> checked_causes(std::vector<CauseEntry> causes,
                                       const char* kind) {
  const int c = static_cast<int>(causes.size());
  std::set<CauseCode> seen;
  for (const auto& e : causes) {
    if (e.code < 1 || e.code > c)
      throw std::invalid_argument(std::string(kind) +
                                  ": cause codes must be dense in 1..C");
    if (!seen.insert(e.code).second)
      throw std::invalid_argument(std::string(kind) +
                                  ": duplicate cause code");
  }
  return causes;
}

}  // namespace

HierarchicalModel::HierarchicalModel(std::vector<CauseEntry> causes)
    : causes_(checked_causes(std::move(causes), "HierarchicalModel")) {}

FlatModel::FlatModel(std::vector<CauseEntry> causes)
    : causes_(checked_causes(std::move(causes), "FlatModel")) {
  std::sort(causes_.begin(), causes_.end(),
            [](const CauseEntry& a, const CauseEntry& b) {
              return a.code < b.code;
            });
}

int cause_count(const ModelVariant& model) {
  return std::visit([](const auto& m) { return m.cause_count(); }, model);
}

std::span<const CauseEntry> model_causes(const ModelVariant& model) {
  return std::visit([](const auto& m) { return m.causes(); }, model);
}

ValidationReport validate_dataset(const Dataset& d) {
  ValidationReport report;
  if (d.records.empty())
    report.issues.push_back({ValidationIssue::kDatasetLevel, "empty dataset"});
  if (d.cause_count < 0)
    report.issues.push_back(
        {ValidationIssue::kDatasetLevel, "negative cause count"});
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const Observation& r = d.records[i];
    if (!std::isfinite(r.y1))
      report.issues.push_back({i, "non-finite y1"});
    if (r.y2 && !std::isfinite(*r.y2))
      report.issues.push_back({i, "non-finite y2"});
    if (r.m2 < 0)
      report.issues.push_back({i, "negative cause code"});
    if (r.m2 > d.cause_count)
      report.issues.push_back({i, "cause code exceeds declared cause count"});
    if (r.m2 == 0 && !r.y2)
      report.issues.push_back({i, "y2 absent but record marked observed"});
    if (r.m2 != 0 && r.y2)
      report.issues.push_back({i, "y2 present but record marked missing"});
  }
  return report;
}

PatternPartition partition_by_pattern(const Dataset& d) {
  const ValidationReport report = validate_dataset(d);
  if (!report.valid())
    throw std::invalid_argument("partition_by_pattern: invalid dataset (" +
                                report.issues.front().message + ")");
  PatternPartition part;
  part.index_sets.resize(static_cast<std::size_t>(d.cause_count) + 1);
  for (std::size_t i = 0; i < d.records.size(); ++i)
    part.index_sets[static_cast<std::size_t>(d.records[i].m2)].push_back(i);
  return part;
}

}  // namespace mcmiss
