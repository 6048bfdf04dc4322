#include "mcmiss/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace mcmiss {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

RandomStream::RandomStream(std::uint64_t seed)
    : seed_(seed), engine_(splitmix64(seed)), normal_(0.0, 1.0) {}

RandomStream RandomStream::child(std::uint64_t index) const {
  return RandomStream(splitmix64(seed_ ^ splitmix64(index + 1)));
}

double RandomStream::uniform() {
  return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double RandomStream::normal() { return normal_(engine_); }

std::vector<std::pair<double, double>> sample_bivnormal(
    const ThetaParams& theta, std::size_t n, RandomStream& stream) {
  std::vector<std::pair<double, double>> out;
  out.reserve(n);
  const double r = theta.rho();
  const double rr = std::sqrt(1.0 - r * r);
  for (std::size_t i = 0; i < n; ++i) {
    const double z1 = stream.normal();
    const double z2 = stream.normal();
    out.emplace_back(theta.mu1() + theta.sigma1() * z1,
                     theta.mu2() + theta.sigma2() * (r * z1 + rr * z2));
  }
  return out;
}

Dataset assign_missingness(const HierarchicalModel& model,
                           const std::vector<std::pair<double, double>>& pairs,
                           RandomStream& stream) {
  Dataset d;
  d.cause_count = model.cause_count();
  d.records.reserve(pairs.size());
  for (const auto& [y1, y2] : pairs) {
    Observation rec;
    rec.y1 = y1;
    rec.m2 = 0;
    for (const CauseEntry& entry : model.causes()) {
      const double p = cause_prob(entry.mechanism, y1, y2);
      if (stream.uniform() < p) {
        rec.m2 = entry.code;
        break;
      }
    }
    if (rec.m2 == 0) rec.y2 = y2;
    d.records.push_back(rec);
  }
  return d;
}

GeneratedDataset simulate_dataset(const ThetaParams& theta,
                                  const HierarchicalModel& model,
                                  std::size_t n, RandomStream& stream) {
  GeneratedDataset g;
  const auto pairs = sample_bivnormal(theta, n, stream);
  g.latent_y2.reserve(n);
  for (const auto& [y1, y2] : pairs) g.latent_y2.push_back(y2);
  g.data = assign_missingness(model, pairs, stream);
  return g;
}

std::vector<double> pattern_ratio(const Dataset& d) {
  const PatternPartition part = partition_by_pattern(d);
  std::vector<double> props;
  props.reserve(part.index_sets.size());
  const double n = static_cast<double>(d.records.size());
  for (const auto& set : part.index_sets)
    props.push_back(static_cast<double>(set.size()) / n);
  return props;
}

double rmse(std::span<const double> estimates, double truth) {
  if (estimates.empty())
    throw std::invalid_argument("rmse: empty estimate list");
  double acc = 0.0;
  for (const double e : estimates) acc += (e - truth) * (e - truth);
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

namespace {

constexpr double kTau2aTrue = 1.0 / 7.0;
constexpr double kTau2bTrue = 50.0;
// Marginal P(M2 = 1) under the scenario-(iii) MAR truth; the reference for
// the misspecified MCAR arm's p column.
constexpr double kScenario3MarginalP1 = 0.5771666040568109;

CauseMechanismSpec nmar_true() {
  return NmarLogisticCentered{kTau2aTrue, kTau2bTrue};
}

std::map<std::string, double> theta_truth() {
  return {{"mu1", 50.0}, {"mu2", 50.0}, {"sigma1", 15.0},
          {"sigma2", 15.0}, {"rho", 0.6}};
}

}  // namespace

ScenarioSpec ScenarioSpec::standard(const std::string& id, std::size_t n,
                                    int reps, std::uint64_t seed) {
  const ThetaParams theta(50.0, 50.0, 15.0, 15.0, 0.6);
  const CauseMechanismSpec mcar_true = Mcar{0.25};
  const CauseMechanismSpec mar_true = MarLogisticCentered{0.5, 53.0};

  HierarchicalModel mech_mcar{{{1, mcar_true}, {2, nmar_true()}}};
  HierarchicalModel mech_mar{{{1, mar_true}, {2, nmar_true()}}};
  HierarchicalModel mech_affine{
      {{1, MarLogisticAffine{0.0, std::log(3.0)}}, {2, nmar_true()}}};

  std::map<std::string, double> truth_k = theta_truth();
  truth_k["tau2a"] = kTau2aTrue;
  truth_k["tau2b"] = kTau2bTrue;

  std::map<std::string, double> truth_u = truth_k;

  ScenarioSpec spec{id,        n,         reps,      seed, 0, theta,
                    mech_mcar, mech_mcar, mech_mcar, "",   "", {},
                    {}};
  spec.truth_known = truth_k;

  if (id == "i") {
    spec.mech_true = mech_mcar;
    spec.mech_fitted_known = mech_mcar;
    spec.mech_fitted_unknown = mech_mcar;
    spec.known_arm_label = "known";
    spec.unknown_arm_label = "unknownS1";
    truth_u["p"] = 0.25;
  } else if (id == "ii") {
    spec.mech_true = mech_mcar;
    spec.mech_fitted_known = mech_mcar;
    spec.mech_fitted_unknown = mech_affine;
    spec.known_arm_label = "known";
    spec.unknown_arm_label = "unknownS2";
    // The affine MCAR limit: slope 0, intercept -log(p/(1-p)).
    truth_u["tau1a_prime"] = 0.0;
    truth_u["tau1b_prime"] = std::log(3.0);
  } else if (id == "iii") {
    spec.mech_true = mech_mar;
    spec.mech_fitted_known = mech_mar;
    spec.mech_fitted_unknown = mech_mcar;
    spec.known_arm_label = "knownS3";
    spec.unknown_arm_label = "unknownS3";
    truth_u["p"] = kScenario3MarginalP1;
  } else {
    throw std::invalid_argument("ScenarioSpec: id must be i, ii, or iii");
  }
  spec.truth_unknown = truth_u;
  return spec;
}

const std::vector<std::string>& scenario_parameter_columns() {
  static const std::vector<std::string> cols = {
      "mu1",  "mu2", "sigma1", "sigma2", "rho",
      "tau1a_prime", "tau1b_prime", "p", "tau2a", "tau2b"};
  return cols;
}

namespace {

// Named natural-scale estimates of one fit, in reporting order.
std::vector<std::pair<std::string, double>> named_estimates(
    const ModelVariant& model, LikelihoodKind kind, const Xi& xi) {
  std::vector<std::pair<std::string, double>> out;
  out.emplace_back("mu1", xi.theta.mu1());
  out.emplace_back("mu2", xi.theta.mu2());
  out.emplace_back("sigma1", xi.theta.sigma1());
  out.emplace_back("sigma2", xi.theta.sigma2());
  out.emplace_back("rho", xi.theta.rho());
  const ParamTransform transform(model, kind);
  const auto causes = model_causes(model);
  for (std::size_t rank = 0; rank < causes.size(); ++rank) {
    if (!transform.cause_estimated(rank)) continue;
    const int code = causes[rank].code;
    const std::string c = std::to_string(code);
    const CauseMechanismSpec& m = xi.taus[rank];
    if (const auto* mc = std::get_if<Mcar>(&m)) {
      out.emplace_back(code == 1 ? "p" : "p" + c, mc->p);
    } else if (const auto* cc = std::get_if<MarLogisticCentered>(&m)) {
      out.emplace_back("tau" + c + "a", cc->tau_a);
      out.emplace_back("tau" + c + "b", cc->tau_b);
    } else if (const auto* aa = std::get_if<MarLogisticAffine>(&m)) {
      out.emplace_back("tau" + c + "a_prime", aa->tau_a);
      out.emplace_back("tau" + c + "b_prime", aa->tau_b);
    } else {
      const auto& nm = std::get<NmarLogisticCentered>(m);
      out.emplace_back("tau" + c + "a", nm.tau_a);
      out.emplace_back("tau" + c + "b", nm.tau_b);
    }
  }
  return out;
}

struct ArmOutcome {
  bool fitted = false;  // false when the fit threw
  bool converged = false;
  std::vector<std::pair<std::string, double>> estimates;
};

struct RepOutcome {
  ArmOutcome known, unknown;
  std::vector<double> pattern_props;
};

ArmOutcome fit_arm(const HierarchicalModel& model, LikelihoodKind kind,
                   const Dataset& data) {
  ArmOutcome out;
  try {
    const FitResult fr = fit(ModelVariant(model), kind, data);
    out.fitted = true;
    out.converged = fr.converged;
    out.estimates = named_estimates(ModelVariant(model), kind, fr.xi_hat);
  } catch (const std::exception&) {
    out.fitted = false;
  }
  return out;
}

RepOutcome run_one_rep(const ScenarioSpec& spec, int rep) {
  RepOutcome out;
  RandomStream stream = RandomStream(spec.seed).child(static_cast<std::uint64_t>(rep));
  const auto pairs = sample_bivnormal(spec.theta_true, spec.n, stream);
  const Dataset data = assign_missingness(spec.mech_true, pairs, stream);
  out.pattern_props = pattern_ratio(data);
  out.known = fit_arm(spec.mech_fitted_known, LikelihoodKind::semi_direct, data);
  out.unknown =
      fit_arm(spec.mech_fitted_unknown, LikelihoodKind::merged_full, data);
  return out;
}

}  // namespace

ScenarioResult run_scenario(const ScenarioSpec& spec) {
  if (spec.reps < 1) throw std::invalid_argument("run_scenario: reps must be >= 1");
  if (spec.n < 10) throw std::invalid_argument("run_scenario: n must be >= 10");

  std::vector<RepOutcome> outcomes(static_cast<std::size_t>(spec.reps));
  const int hw = static_cast<int>(std::thread::hardware_concurrency());
  const int threads =
      std::max(1, std::min(spec.threads > 0 ? spec.threads : std::max(hw, 1),
                           spec.reps));

  std::atomic<int> next{0};
  const auto worker = [&] {
    for (;;) {
      const int r = next.fetch_add(1);
      if (r >= spec.reps) break;
      outcomes[static_cast<std::size_t>(r)] = run_one_rep(spec, r);
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  ScenarioResult result{spec, {}, {}, {}, {}, {}};
  result.mean_pattern_props.assign(
      static_cast<std::size_t>(spec.mech_true.cause_count()) + 1, 0.0);

  struct ArmAccum {
    std::map<std::string, std::vector<double>> converged_estimates;
    int excluded = 0;
    int converged = 0;
  };
  ArmAccum acc_known, acc_unknown;

  const auto absorb = [&](const std::string& label, const ArmOutcome& arm,
                          ArmAccum& acc, int rep) {
    if (!arm.fitted) {
      ++acc.excluded;
      return;
    }
    for (const auto& [name, value] : arm.estimates)
      result.estimates.push_back({rep, label, name, value, arm.converged});
    if (!arm.converged) {
      ++acc.excluded;
      return;
    }
    ++acc.converged;
    for (const auto& [name, value] : arm.estimates)
      acc.converged_estimates[name].push_back(value);
  };

  for (int r = 0; r < spec.reps; ++r) {
    const RepOutcome& o = outcomes[static_cast<std::size_t>(r)];
    absorb(spec.known_arm_label, o.known, acc_known, r);
    absorb(spec.unknown_arm_label, o.unknown, acc_unknown, r);
    for (std::size_t k = 0; k < o.pattern_props.size(); ++k)
      result.mean_pattern_props[k] += o.pattern_props[k];
  }
  for (double& p : result.mean_pattern_props) p /= static_cast<double>(spec.reps);

  const auto arm_rmse = [&](const std::string& label, const ArmAccum& acc,
                            const std::map<std::string, double>& truth) {
    ArmRmse row;
    row.arm = label;
    for (const std::string& col : scenario_parameter_columns()) {
      const auto est = acc.converged_estimates.find(col);
      const auto tru = truth.find(col);
      if (est == acc.converged_estimates.end() || tru == truth.end() ||
          est->second.empty()) {
        row.by_parameter[col] = std::nullopt;
      } else {
        row.by_parameter[col] = rmse(est->second, tru->second);
      }
    }
    return row;
  };
  result.rmse_table.push_back(
      arm_rmse(spec.known_arm_label, acc_known, spec.truth_known));
  result.rmse_table.push_back(
      arm_rmse(spec.unknown_arm_label, acc_unknown, spec.truth_unknown));
  result.excluded_reps[spec.known_arm_label] = acc_known.excluded;
  result.excluded_reps[spec.unknown_arm_label] = acc_unknown.excluded;
  result.converged_reps[spec.known_arm_label] = acc_known.converged;
  result.converged_reps[spec.unknown_arm_label] = acc_unknown.converged;
  return result;
}

}  // namespace mcmiss
