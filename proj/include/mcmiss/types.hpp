#pragma once

// Core domain types for cause-coded incomplete bivariate data.
//
// A record carries the first-wave score y1 (always observed), the
// second-wave score y2 (possibly missing), and a cause code m2:
//   m2 = 0      y2 observed
//   m2 = c >= 1 y2 missing by cause c
// All types are immutable after construction and safe to share across
// threads.

#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace mcmiss {

using CauseCode = int;

struct Observation {
  double y1 = 0.0;
  std::optional<double> y2;
  CauseCode m2 = 0;
};

struct Dataset {
  std::vector<Observation> records;
  int cause_count = 0;  // C: cause codes run 1..C
};

struct ValidationIssue {
  std::size_t record_index;  // npos for dataset-level issues
  std::string message;
  static constexpr std::size_t kDatasetLevel = static_cast<std::size_t>(-1);
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool valid() const { return issues.empty(); }
};

ValidationReport validate_dataset(const Dataset& d);

// Index sets I_0, ..., I_C; disjoint and exhaustive over record indices.
struct PatternPartition {
  std::vector<std::vector<std::size_t>> index_sets;  // size cause_count + 1
};

// Throws std::invalid_argument when the dataset fails validation.
PatternPartition partition_by_pattern(const Dataset& d);

// Bivariate-normal outcome parameters (mu1, mu2, sigma1, sigma2, rho).
class ThetaParams {
 public:
  ThetaParams(double mu1, double mu2, double sigma1, double sigma2, double rho);

  double mu1() const { return mu1_; }
  double mu2() const { return mu2_; }
  double sigma1() const { return sigma1_; }
  double sigma2() const { return sigma2_; }
  double rho() const { return rho_; }

  bool operator==(const ThetaParams&) const = default;

 private:
  double mu1_, mu2_, sigma1_, sigma2_, rho_;
};

// One cause's missingness model. Centered logistics are decreasing in the
// covariate when the slope is positive:
//   centered: P = 1 / (1 + exp(tau_a * (cov - tau_b)))
//   affine:   P = 1 / (1 + exp(tau_a * cov + tau_b))
// MAR variants read y1; the NMAR variant reads y2.
struct Mcar {
  double p;
};
struct MarLogisticCentered {
  double tau_a, tau_b;
};
struct MarLogisticAffine {
  double tau_a, tau_b;
};
struct NmarLogisticCentered {
  double tau_a, tau_b;
};

using CauseMechanismSpec =
    std::variant<Mcar, MarLogisticCentered, MarLogisticAffine,
                 NmarLogisticCentered>;

struct CauseEntry {
  CauseCode code;
  CauseMechanismSpec mechanism;
};

// Causes fire in priority order (entry 0 strongest): a cause can act only on
// units that survived every stronger cause.
class HierarchicalModel {
 public:
  explicit HierarchicalModel(std::vector<CauseEntry> causes);

  int cause_count() const { return static_cast<int>(causes_.size()); }
  std::span<const CauseEntry> causes() const { return causes_; }
  const CauseEntry& cause(std::size_t priority_rank) const {
    return causes_[priority_rank];
  }

 private:
  std::vector<CauseEntry> causes_;  // strongest priority first
};

// Unordered per-cause mechanisms composing additively; validity (cause
// probabilities summing below 1) is checked pointwise at evaluation.
class FlatModel {
 public:
  explicit FlatModel(std::vector<CauseEntry> causes);

  int cause_count() const { return static_cast<int>(causes_.size()); }
  std::span<const CauseEntry> causes() const { return causes_; }

 private:
  std::vector<CauseEntry> causes_;  // stored sorted by code
};

using ModelVariant = std::variant<HierarchicalModel, FlatModel>;

int cause_count(const ModelVariant& model);
std::span<const CauseEntry> model_causes(const ModelVariant& model);

// Full parameter vector: outcome parameters plus per-cause mechanism
// parameters, aligned with the model's cause order. Theta and the taus share
// no components by construction.
struct Xi {
  ThetaParams theta;
  std::vector<CauseMechanismSpec> taus;
};

}  // namespace mcmiss
