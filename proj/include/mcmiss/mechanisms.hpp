#pragma once

// Per-cause missingness probabilities and their composition into pattern
// probabilities under hierarchical or flat structure.

#include <optional>
#include <stdexcept>
#include <vector>

#include "mcmiss/types.hpp"

namespace mcmiss {

// Probabilities are clamped to this range before any logarithm so extreme
// scores cannot produce -inf log-likelihoods.
inline constexpr double kProbFloor = 1e-300;
inline constexpr double kProbCeil = 1.0 - 1e-16;

inline double clamp_prob(double p) {
  if (p < kProbFloor) return kProbFloor;
  if (p > kProbCeil) return kProbCeil;
  return p;
}

struct missing_covariate_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Flat-model cause probabilities summed to >= 1 at an evaluated point.
struct flat_model_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class MechanismClass { mcar, mar, nmar };

MechanismClass classify_mechanism(const CauseMechanismSpec& mech);

// P(cause fires | covariates). MCAR ignores both scores, MAR variants read
// y1 only, the NMAR variant requires y2 (missing_covariate_error otherwise).
double cause_prob(const CauseMechanismSpec& mech, double y1,
                  std::optional<double> y2);

struct MechanismEvaluation {
  std::vector<double> cause_probs;  // indexed by cause code - 1
  double observe_prob = 1.0;
};

// Hierarchical composition: cause c fires with P_c * prod_{b stronger}(1-P_b);
// the observation probability is the full survival product. Entries sum to 1.
MechanismEvaluation hierarchical_pattern_probs(const HierarchicalModel& model,
                                               double y1, double y2);

// Flat composition: observe_prob = 1 - sum of cause probabilities; throws
// flat_model_error when the sum reaches 1 at the evaluated point.
MechanismEvaluation flat_pattern_probs(const FlatModel& model, double y1,
                                       double y2);

// The constant p such that the affine mechanism equals p for every y1, when
// the slope is negligible (|tau_a| <= 1e-8); absent for sloped mechanisms.
std::optional<double> mcar_equivalent(const MarLogisticAffine& affine);

}  // namespace mcmiss
