#include <doctest.h>

#include <cmath>

#include "dirx/agents.hpp"
#include "dirx/environments.hpp"
#include "oracles.hpp"

using namespace dirx;

namespace {

// One real state and one action; reward 0 so only the pseudo-state pays.
ModelInfo single_state(int H) {
  return ModelInfo{H, 1, 1, std::vector<Eigen::MatrixXd>(H, Eigen::MatrixXd::Zero(1, 1))};
}

std::vector<Step> run_agent(Agent& agent, const TabularMdp& mdp, int episodes, std::uint64_t seed) {
  Stream env(seed);
  std::vector<Step> steps;
  for (int t = 0; t < episodes; ++t) {
    agent.plan(t);
    for (const Step& st : sample_episode(mdp, agent.policy(), env)) {
      agent.observe(st);
      steps.push_back(st);
    }
  }
  return steps;
}

}  // namespace

TEST_CASE("variant names") {
  CHECK(parse_variant("incr_bayes_ucbvi") == Variant::incr_bayes_ucbvi);
  CHECK(std::string(to_string(Variant::rlsvi)) == "rlsvi");
  CHECK_THROWS_WITH_AS(parse_variant("foo"), doctest::Contains("'foo'"), std::invalid_argument);
  CHECK(uses_pseudo_state(Variant::bayes_ucbvi));
  CHECK(!uses_pseudo_state(Variant::psrl));
}

TEST_CASE("counts and pseudo-counts") {
  CountsTable c(2, 3, 2, 1);
  for (int i = 0; i < 3; ++i) c.observe(0, 1, 1, 2);
  c.observe(0, 1, 1, 0);
  c.observe(1, 0, 0, 1);
  CHECK(c.visits(0, 1, 1) == 4);
  CHECK(c.pseudo_visits(0, 1, 1) == 5);
  CHECK(c.pseudo_counts(0, 1, 1).sum() == c.pseudo_visits(0, 1, 1));
  CHECK(c.visits(0, 1, 0) == 0);
  CHECK(c.visits(1, 1, 1) == 0);
  CHECK(c.observed(0, 1, 1) == std::vector<int>{2, 0});

  CountsTable d(1, 2, 1, 1);
  for (int i = 0; i < 3; ++i) d.observe(0, 0, 0, 1);
  const Eigen::VectorXd p = d.pseudo_empirical(0, 0, 0);
  CHECK(p(2) == 0.25);
  CHECK(p(1) == 0.75);
  CHECK(p(0) == 0.0);
  CHECK(d.empirical(0, 1, 0) == Eigen::Vector2d(0.5, 0.5));

  CHECK_THROWS_AS(c.observe(2, 0, 0, 0), StructuralError);
  CHECK_THROWS_AS(c.observe(0, 0, 0, 3), StructuralError);
}

TEST_CASE("schedules") {
  QuantileSchedule s;
  CHECK(s.kappa(3, 4, 10, 4, 20) == 0.85);
  s.delta = 0.1;
  const double k = theoretical_kappa(s, 0, 1, 2, 2, 3);
  CHECK(1.0 - k == doctest::Approx(0.1 * QuantileSchedule::c_kappa() / 12.0));
  CHECK(1.0 - k == doctest::Approx(2.68e-6).epsilon(0.01));
  CHECK(theoretical_kappa(s, 1, 1, 2, 2, 3) >= k);
  CHECK(theoretical_kappa(s, 0, 1, 3, 2, 3) >= k);
  CHECK(theoretical_kappa(s, 0, 1, 2, 2, 4) >= k);
  CHECK_THROWS_AS(theoretical_kappa(s, 0, 0, 2, 2, 3), DomainError);

  CHECK(ucbvi_bonus(0, 3, 0) == 3.0);
  CHECK(ucbvi_bonus(4, 3, 0) == doctest::Approx(1.25));
  CHECK(ucbvi_bonus(1000000, 3, 0) < 0.01);
}

TEST_CASE("Bayes-UCBVI before any data plans to the pseudo-state") {
  const TabularMdp mdp = build_random_mdp(4, 3, 5, 8);
  const ModelInfo info = ModelInfo::from(mdp);
  for (double rbar : {1.0, 2.0}) {
    CountsTable counts(5, 4, 3, 1);
    const ValueTable t = plan_bayes_ucbvi(counts, info, QuantileSchedule{}, 16, rbar, 1);
    const OptimalSolution opt = optimal_values(mdp);
    for (int h = 0; h < 5; ++h) {
      CHECK(t.v(h, 4) == rbar * (5 - h));
      for (int s = 0; s < 4; ++s) {
        for (int a = 0; a < 3; ++a) {
          CHECK(t.q[h](s, a) == doctest::Approx(mdp.reward(h, s, a) + rbar * (5 - h - 1)));
          CHECK(t.q[h](s, a) >= opt.values.q[h](s, a));
        }
      }
    }
  }
}

TEST_CASE("Bayes-UCBVI with n0 = 0 has no posterior") {
  const ModelInfo info = single_state(2);
  CountsTable counts(2, 1, 1, 0);
  CHECK_THROWS_AS(plan_bayes_ucbvi(counts, info, QuantileSchedule{}, 8, 1.0, 0), PlanningError);
}

TEST_CASE("Bayes-UCBVI quantile matches a Beta oracle") {
  // Stage 0 has counts (pseudo 1, real 3); V at stage 1 is 0 for the real
  // state and 1 for the pseudo-state, so Q_0 is the kappa-quantile of Beta(1, 3).
  const ModelInfo info = single_state(2);
  CountsTable counts(2, 1, 1, 1);
  for (int i = 0; i < 3; ++i) counts.observe(0, 0, 0, 0);
  QuantileSchedule s;
  s.fixed_kappa = 0.7;
  const ValueTable t = plan_bayes_ucbvi(counts, info, s, 100000, 1.0, 3);
  CHECK(t.q[1](0, 0) == 0.0);
  CHECK(t.v(1, 1) == 1.0);
  const double exact = 1.0 - std::cbrt(1.0 - 0.7);
  CHECK(std::abs(t.q[0](0, 0) - exact) <= 0.01);
  CHECK(oracle::beta_upper_tail(1, 3, exact) == doctest::Approx(0.3));
}

TEST_CASE("Bayes-UCBVI is monotone in kappa for shared draws") {
  const TabularMdp mdp = build_random_mdp(3, 2, 3, 4);
  const ModelInfo info = ModelInfo::from(mdp);
  CountsTable counts(3, 3, 2, 1);
  Stream env(2);
  for (int t = 0; t < 30; ++t) {
    for (const Step& st : sample_episode(mdp, Policy(3, 3), env)) {
      counts.observe(st.h, st.state, st.action, st.next_state);
    }
  }
  ValueTable prev(3, 4, 2);
  prev.q.assign(4, Eigen::MatrixXd::Constant(4, 2, -1.0));
  for (double k : {0.3, 0.6, 0.85, 0.95}) {
    QuantileSchedule s;
    s.fixed_kappa = k;
    const ValueTable t = plan_bayes_ucbvi(counts, info, s, 64, 1.0, 99);
    for (int h = 0; h < 3; ++h) CHECK(((t.q[h] - prev.q[h]).array() >= 0).all());
    prev = t;
  }
}

TEST_CASE("median quantile on a single-state model equals exact_quantile_mc") {
  const ModelInfo info = single_state(2);
  CountsTable counts(2, 1, 1, 2);
  for (int i = 0; i < 5; ++i) counts.observe(0, 0, 0, 0);
  QuantileSchedule s;
  s.fixed_kappa = 0.5;
  const ValueTable t = plan_bayes_ucbvi(counts, info, s, 101, 1.0, 17);
  // Same coordinates in the same order: pseudo first, then the real state.
  const WeightedSumSpec spec{Eigen::Vector2i(2, 5), Eigen::Vector2d(1.0, 0.0), 1.0};
  Stream stream = derive_stream(17, {0, 0, 0});
  CHECK(t.q[0](0, 0) == exact_quantile_mc(spec, 0.5, 101, stream));
}

TEST_CASE("incremental variant") {
  const TabularMdp mdp = build_random_mdp(3, 2, 4, 21);
  const ModelInfo info = ModelInfo::from(mdp);
  AgentConfig cfg;
  cfg.variant = Variant::incr_bayes_ucbvi;
  cfg.seed = 5;
  auto agent = make_agent(cfg, info);
  agent->plan(0);
  for (int h = 0; h < 4; ++h) {
    for (int s = 0; s < 3; ++s) {
      for (int a = 0; a < 2; ++a) {
        CHECK(agent->values().q[h](s, a) == doctest::Approx(mdp.reward(h, s, a) + (4 - h - 1)));
      }
    }
  }
  run_agent(*agent, mdp, 20, 1);
  agent->plan(20);
  const ValueTable first = agent->values();
  agent->plan(21);
  CHECK(agent->values().q == first.q);
}

TEST_CASE("RLSVI noise scale matches the bonus") {
  const ModelInfo info = single_state(1);
  CountsTable counts(1, 1, 1, 0);
  for (int i = 0; i < 4; ++i) counts.observe(0, 0, 0, 0);
  const double beta = ucbvi_bonus(4, 1, 0);
  const int n = 10000;
  double sum = 0, sq = 0;
  for (int seed = 0; seed < n; ++seed) {
    const double x = plan_rlsvi(counts, info, static_cast<std::uint64_t>(seed), false).q[0](0, 0);
    sum += x;
    sq += x * x;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(sd - beta) <= 3 * beta / std::sqrt(2.0 * n));
  CHECK(std::abs(mean) <= 3 * beta / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("RLSVI clipping bounds values") {
  const TabularMdp mdp = build_random_mdp(3, 2, 4, 2);
  const ModelInfo info = ModelInfo::from(mdp);
  CountsTable counts(4, 3, 2, 0);
  const ValueTable t = plan_rlsvi(counts, info, 11, true);
  for (int h = 0; h < 4; ++h) {
    CHECK((t.v.row(h).array() >= 0).all());
    CHECK((t.v.row(h).array() <= 4 - h).all());
  }
}

TEST_CASE("UCBVI values are clipped and optimistic before data") {
  const TabularMdp mdp = build_random_mdp(3, 2, 4, 2);
  const ModelInfo info = ModelInfo::from(mdp);
  CountsTable counts(4, 3, 2, 0);
  const ValueTable t = plan_ucbvi(counts, info);
  const OptimalSolution opt = optimal_values(mdp);
  for (int h = 0; h < 4; ++h) {
    CHECK((t.v.row(h).array() <= 4 - h).all());
    CHECK(((t.v.row(h) - opt.values.v.row(h)).array() >= 0).all());
  }
}

TEST_CASE("PSRL transition samples") {
  CountsTable prior(1, 5, 1, 0);
  Stream s(31);
  Eigen::VectorXd p;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(5), sq = Eigen::VectorXd::Zero(5);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    sample_psrl_transition(prior, 0, 0, 0, s, p);
    sum += p;
    sq += p.cwiseProduct(p);
  }
  const Eigen::VectorXd mean = sum / n;
  const Eigen::VectorXd se = ((sq / n - mean.cwiseProduct(mean)) / n).cwiseSqrt();
  for (int j = 0; j < 5; ++j) CHECK(std::abs(mean(j) - 0.2) <= 3 * se(j));

  CountsTable seen(1, 5, 1, 0);
  for (int i = 0; i < 1000; ++i) seen.observe(0, 0, 0, 3);
  double tv = 0.0;
  for (int i = 0; i < 2000; ++i) {
    sample_psrl_transition(seen, 0, 0, 0, s, p);
    tv += 1.0 - p(3);
  }
  CHECK(tv / 2000 <= 0.1);
}

TEST_CASE("PSRL reward posterior moves toward observed rewards") {
  BetaRewardPosterior r(1, 1, 1);
  for (int i = 0; i < 200; ++i) r.observe(0, 0, 0, false);
  CHECK(r.successes(0, 0, 0) == 0);
  CHECK(r.failures(0, 0, 0) == 200);
  const ModelInfo info = single_state(1);
  CountsTable counts(1, 1, 1, 0);
  double total = 0.0;
  for (int seed = 0; seed < 200; ++seed) total += plan_psrl(counts, r, info, seed).q[0](0, 0);
  CHECK(total / 200 < 0.02);
}

TEST_CASE("act and greedy policy") {
  ValueTable t(1, 2, 3);
  t.q[0] << 1, 1, 1, 0, 2, 1;
  CHECK(act(t, 0, 0) == 0);
  CHECK(act(t, 1, 0) == 1);
  t.q[0] *= 3.0;
  CHECK(act(t, 1, 0) == 1);
  CHECK(greedy_policy(t, 2).table() == (Eigen::MatrixXi(1, 2) << 0, 1).finished());
}

TEST_CASE("every variant is deterministic given its seed") {
  const TabularMdp mdp = build_random_mdp(4, 2, 5, 61);
  const ModelInfo info = ModelInfo::from(mdp);
  for (Variant v : {Variant::bayes_ucbvi, Variant::incr_bayes_ucbvi, Variant::ucbvi, Variant::rlsvi,
                    Variant::psrl}) {
    AgentConfig cfg;
    cfg.variant = v;
    cfg.seed = 1234;
    cfg.B = 16;
    auto a = make_agent(cfg, info);
    auto b = make_agent(cfg, info);
    const auto sa = run_agent(*a, mdp, 15, 9);
    const auto sb = run_agent(*b, mdp, 15, 9);
    CHECK(sa == sb);
    CHECK(a->values().q == b->values().q);
    for (int s = 0; s < 4; ++s) CHECK(a->counts().visits(2, s, 1) == b->counts().visits(2, s, 1));
  }
}

TEST_CASE("Bernstein audit finds no violations in an instrumented run") {
  const TabularMdp mdp = build_random_mdp(4, 2, 4, 5);
  const ModelInfo info = ModelInfo::from(mdp);
  AgentConfig cfg;
  cfg.seed = 77;
  auto agent = make_agent(cfg, info);
  Stream env(4);
  PlanningAudit audit;
  for (int t = 0; t < 100; ++t) {
    agent->plan(t, &audit);
    for (const Step& st : sample_episode(mdp, agent->policy(), env)) agent->observe(st);
  }
  CHECK(audit.cells == 100 * 4 * 4 * 2);
  CHECK(audit.bernstein_violations == 0);
}
