#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "mcmiss/mechanisms.hpp"

using namespace mcmiss;

TEST_CASE("centered MAR logistic hits 1/2 at its midpoint") {
  CHECK(cause_prob(MarLogisticCentered{0.5, 53.0}, 53.0, std::nullopt) ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("MCAR ignores both scores") {
  const CauseMechanismSpec m = Mcar{0.25};
  CHECK(cause_prob(m, -1e6, std::nullopt) == 0.25);
  CHECK(cause_prob(m, 123.0, 9.0) == 0.25);
}

TEST_CASE("affine MAR with zero slope equals the inverse logit of b") {
  const CauseMechanismSpec m = MarLogisticAffine{0.0, std::log(3.0)};
  for (const double y1 : {-100.0, 0.0, 53.0, 1e5})
    CHECK(cause_prob(m, y1, std::nullopt) ==
          doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("centered NMAR logistic hits 1/2 at its midpoint") {
  CHECK(cause_prob(NmarLogisticCentered{1.0 / 7.0, 50.0}, 0.0, 50.0) ==
        doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("NMAR evaluation without y2 is a missing-covariate error") {
  CHECK_THROWS_AS(
      cause_prob(NmarLogisticCentered{1.0, 0.0}, 1.0, std::nullopt),
      missing_covariate_error);
}

TEST_CASE("MAR variants ignore y2") {
  const CauseMechanismSpec m = MarLogisticCentered{0.3, 10.0};
  CHECK(cause_prob(m, 12.0, 999.0) == cause_prob(m, 12.0, std::nullopt));
}

TEST_CASE("hierarchical composition multiplies survival") {
  // C=2, P1 = 0.25 (MCAR), P2(y2 = 50) = 0.5.
  const HierarchicalModel model{
      {{1, Mcar{0.25}}, {2, NmarLogisticCentered{1.0 / 7.0, 50.0}}}};
  const MechanismEvaluation eval = hierarchical_pattern_probs(model, 0.0, 50.0);
  CHECK(eval.cause_probs[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(eval.cause_probs[1] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(eval.observe_prob == doctest::Approx(0.375).epsilon(1e-15));
}

TEST_CASE("a certain first cause absorbs everything") {
  // A centered logistic with an extreme midpoint saturates to 1.
  const HierarchicalModel model{
      {{1, MarLogisticCentered{1.0, 1e9}}, {2, Mcar{0.5}}}};
  const MechanismEvaluation eval = hierarchical_pattern_probs(model, 0.0, 0.0);
  CHECK(eval.cause_probs[0] == 1.0);
  CHECK(eval.cause_probs[1] == 0.0);
  CHECK(eval.observe_prob == 0.0);
}

TEST_CASE("all-zero mechanisms leave everything observed") {
  const HierarchicalModel model{
      {{1, MarLogisticCentered{1.0, -1e9}}, {2, MarLogisticCentered{1.0, -1e9}}}};
  const MechanismEvaluation eval = hierarchical_pattern_probs(model, 0.0, 0.0);
  CHECK(eval.observe_prob == 1.0);
}

TEST_CASE("flat composition is the complement of the cause sum") {
  const FlatModel model{{{1, Mcar{0.2}}, {2, Mcar{0.3}}}};
  const MechanismEvaluation eval = flat_pattern_probs(model, 0.0, 0.0);
  CHECK(eval.observe_prob == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("flat cause probabilities above 1 raise an error") {
  const FlatModel model{{{1, Mcar{0.6}}, {2, Mcar{0.7}}}};
  CHECK_THROWS_AS(flat_pattern_probs(model, 0.0, 0.0), flat_model_error);
}

TEST_CASE("single-cause flat model reduces to the complement") {
  const FlatModel model{{{1, Mcar{0.25}}}};
  CHECK(flat_pattern_probs(model, 0.0, 0.0).observe_prob ==
        doctest::Approx(0.75).epsilon(1e-15));
}

TEST_CASE("hierarchical and flat coincide for a single cause") {
  const CauseMechanismSpec mech = NmarLogisticCentered{0.4, 1.0};
  const HierarchicalModel h{{{1, mech}}};
  const FlatModel f{{{1, mech}}};
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> y(-10.0, 10.0);
  for (int i = 0; i < 100; ++i) {
    const double y1 = y(eng), y2 = y(eng);
    const auto he = hierarchical_pattern_probs(h, y1, y2);
    const auto fe = flat_pattern_probs(f, y1, y2);
    CHECK(he.cause_probs[0] == fe.cause_probs[0]);
    CHECK(he.observe_prob == fe.observe_prob);
  }
}

TEST_CASE("mcar_equivalent inverts the flat affine mechanism") {
  CHECK(*mcar_equivalent(MarLogisticAffine{0.0, std::log(3.0)}) ==
        doctest::Approx(0.25).epsilon(1e-15));
  CHECK(*mcar_equivalent(MarLogisticAffine{0.0, 0.0}) == 0.5);
  CHECK_FALSE(mcar_equivalent(MarLogisticAffine{0.5, -26.5}));
  CHECK(mcar_equivalent(MarLogisticAffine{9e-9, 0.0}).has_value());
  CHECK_FALSE(mcar_equivalent(MarLogisticAffine{1.1e-8, 0.0}));
}

TEST_CASE("classify_mechanism follows the variant") {
  CHECK(classify_mechanism(Mcar{0.25}) == MechanismClass::mcar);
  CHECK(classify_mechanism(MarLogisticCentered{0.5, 53.0}) ==
        MechanismClass::mar);
  CHECK(classify_mechanism(MarLogisticAffine{0.0, 1.0}) == MechanismClass::mar);
  CHECK(classify_mechanism(NmarLogisticCentered{1.0 / 7.0, 50.0}) ==
        MechanismClass::nmar);
}

TEST_CASE("hierarchical pattern probabilities always sum to one") {
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> y(-50.0, 150.0);
  std::uniform_real_distribution<double> slope(-2.0, 2.0);
  std::uniform_real_distribution<double> mid(-20.0, 120.0);
  std::uniform_real_distribution<double> prob(0.01, 0.99);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<CauseEntry> causes;
    const int c = 1 + static_cast<int>(eng() % 4);
    for (int k = 1; k <= c; ++k) {
      switch (eng() % 4) {
        case 0: causes.push_back({k, Mcar{prob(eng)}}); break;
        case 1: causes.push_back({k, MarLogisticCentered{slope(eng), mid(eng)}}); break;
        case 2: causes.push_back({k, MarLogisticAffine{slope(eng), mid(eng)}}); break;
        default: causes.push_back({k, NmarLogisticCentered{slope(eng), mid(eng)}});
      }
    }
    const HierarchicalModel model{std::move(causes)};
    const auto eval = hierarchical_pattern_probs(model, y(eng), y(eng));
    double total = eval.observe_prob;
    for (const double p : eval.cause_probs) {
      CHECK(p >= 0.0);
      CHECK(p <= 1.0);
      total += p;
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
}

TEST_CASE("centered logistic is strictly decreasing for positive slope") {
  const CauseMechanismSpec m = MarLogisticCentered{0.7, 5.0};
  double prev = 1.0;
  for (double y1 = -20.0; y1 <= 30.0; y1 += 0.5) {
    const double p = cause_prob(m, y1, std::nullopt);
    CHECK(p < prev);
    prev = p;
  }
}

TEST_CASE("centered logistic converges to MCAR along the stated limit") {
  // tau_a -> 0 with tau_a * tau_b -> log(p / (1-p)) gives P -> p everywhere.
  const double p = 0.25;
  const double target = std::log(p / (1.0 - p));
  double worst_prev = 1.0;
  for (const double tau_a : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const CauseMechanismSpec m = MarLogisticCentered{tau_a, target / tau_a};
    double worst = 0.0;
    for (const double y1 : {0.0, 25.0, 50.0, 75.0, 100.0})
      worst = std::max(worst,
                       std::abs(cause_prob(m, y1, std::nullopt) - p));
    CHECK(worst < worst_prev + 1e-12);
    worst_prev = worst;
  }
  CHECK(worst_prev < 1e-6);
}
