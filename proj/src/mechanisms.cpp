#include "mcmiss/mechanisms.hpp"

#include <cmath>

#include "mcmiss/kernels.hpp"

namespace mcmiss {

namespace {

inline double logistic(double t) {
  if (t >= kernels::kExpOverflow) return 0.0;
  if (t <= kernels::kExpUnderflow) return 1.0;
  return 1.0 / (1.0 + std::exp(t));
}

}  // namespace

MechanismClass classify_mechanism(const CauseMechanismSpec& mech) {
  struct Visitor {
    MechanismClass operator()(const Mcar&) const { return MechanismClass::mcar; }
    MechanismClass operator()(const MarLogisticCentered&) const {
      return MechanismClass::mar;
    }
    MechanismClass operator()(const MarLogisticAffine&) const {
      return MechanismClass::mar;
    }
    MechanismClass operator()(const NmarLogisticCentered&) const {
      return MechanismClass::nmar;
    }
  };
  return std::visit(Visitor{}, mech);
}

double cause_prob(const CauseMechanismSpec& mech, double y1,
                  std::optional<double> y2) {
  struct Visitor {
    double y1;
    const std::optional<double>& y2;
    double operator()(const Mcar& m) const { return m.p; }
    double operator()(const MarLogisticCentered& m) const {
      return logistic(m.tau_a * (y1 - m.tau_b));
    }
    double operator()(const MarLogisticAffine& m) const {
      return logistic(m.tau_a * y1 + m.tau_b);
    }
    double operator()(const NmarLogisticCentered& m) const {
      if (!y2)
        throw missing_covariate_error(
            "cause_prob: NMAR mechanism evaluated without y2");
      return logistic(m.tau_a * (*y2 - m.tau_b));
    }
  };
  return std::visit(Visitor{y1, y2}, mech);
}

MechanismEvaluation hierarchical_pattern_probs(const HierarchicalModel& model,
                                               double y1, double y2) {
  MechanismEvaluation eval;
  eval.cause_probs.assign(static_cast<std::size_t>(model.cause_count()), 0.0);
  double survival = 1.0;
  for (const CauseEntry& entry : model.causes()) {
    const double p = cause_prob(entry.mechanism, y1, y2);
    eval.cause_probs[static_cast<std::size_t>(entry.code - 1)] = survival * p;
    survival *= 1.0 - p;
  }
  eval.observe_prob = survival;
  return eval;
}

MechanismEvaluation flat_pattern_probs(const FlatModel& model, double y1,
                                       double y2) {
  MechanismEvaluation eval;
  eval.cause_probs.assign(static_cast<std::size_t>(model.cause_count()), 0.0);
  double total = 0.0;
  for (const CauseEntry& entry : model.causes()) {
    const double p = cause_prob(entry.mechanism, y1, y2);
    eval.cause_probs[static_cast<std::size_t>(entry.code - 1)] = p;
    total += p;
  }
  if (total >= 1.0)
    throw flat_model_error(
        "flat_pattern_probs: cause probabilities sum to >= 1 at the "
        "evaluated point");
  eval.observe_prob = 1.0 - total;
  return eval;
}

std::optional<double> mcar_equivalent(const MarLogisticAffine& affine) {
  constexpr double kSlopeTolerance = 1e-8;
  if (std::abs(affine.tau_a) > kSlopeTolerance) return std::nullopt;
  return logistic(affine.tau_b);
}

}  // namespace mcmiss
