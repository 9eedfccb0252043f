// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dirx/agents.hpp"
#include "dirx/cli.hpp"
#include "dirx/dirichlet.hpp"
#include "dirx/environments.hpp"
#include "dirx/format.hpp"
#include "dirx/harness.hpp"
#include "dirx/mdp.hpp"
#include "oracles.hpp"

using namespace dirx;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// mu uniformly inside (p f, upper), away from both ends.
double interior_mu(const WeightedSumSpec& spec, Stream& s) {
  return spec.mean() + (spec.upper - spec.mean()) * (0.02 + 0.96 * s.uniform01());
}

Outcome kinf_oracle_equivalence() {
  Stream s(1001);
  int done = 0;
  double worst_primal = 0.0, worst_dual = 0.0;
  while (done < 100) {
    const WeightedSumSpec spec = random_spec(s, 3, 20, false);
    if (!(spec.mean() < spec.upper)) continue;
    const double mu = interior_mu(spec, s);
    const double value = kinf(spec, mu).value;
    const Eigen::VectorXd p = spec.mean_weights();
    worst_primal = std::max(worst_primal, std::abs(value - oracle::kinf_primal(p, spec.values, mu, 1e-5)));
    worst_dual = std::max(worst_dual,
                          std::abs(value - oracle::kinf_dual_grid(p, spec.values, spec.upper, mu, 1e-4)));
    ++done;
  }
  std::ostringstream d;
  d << "100 instances, max |kinf - primal| = " << worst_primal << ", max |kinf - dual grid| = " << worst_dual;
  return {worst_primal <= 5e-3 && worst_dual <= 5e-3, d.str()};
}

Outcome upper_bound_universality() {
  const WeightedSumSpec anchor = WeightedSumSpec::make(Eigen::Vector2i(2, 2), Eigen::Vector2d(1, 0));
  const double exact = oracle::beta_upper_tail(2, 2, 0.75);
  const double anchor_bound = boundary_upper_bound(anchor, 0.75);
  Stream anchor_stream(7);
  const BoundCertificate anchor_cert = certify_bounds(anchor, 0.75, 1000000, anchor_stream, workers());
  bool ok = std::abs(exact - 0.15625) < 1e-12 && exact <= anchor_bound &&
            std::abs(anchor_bound - 0.5626) < 1e-3 &&
            std::abs(anchor_cert.mc_estimate - exact) <= anchor_cert.wilson.half_width();

  Stream s(2002);
  int failures = 0;
  double worst_margin = -1.0;
  for (int i = 0; i < 200; ++i) {
    WeightedSumSpec spec = random_spec(s, 5, 20, false);
    while (!(spec.mean() < spec.upper)) spec = random_spec(s, 5, 20, false);
    const double mu = interior_mu(spec, s);
    const BoundCertificate c = certify_bounds(spec, mu, 1000000, s, workers());
    const double margin = c.mc_estimate - (c.upper_bound + 3.0 * c.wilson.half_width());
    worst_margin = std::max(worst_margin, margin);
    if (margin > 0.0) ++failures;
  }
  ok = ok && failures == 0;
  std::ostringstream d;
  d << "anchor P[Beta(2,2)>=0.75]=" << exact << " (MC " << anchor_cert.mc_estimate << ") <= " << anchor_bound
    << "; 200 specs x 1e6 draws, " << failures << " above bound+3w, worst margin " << worst_margin;
  return {ok, d.str()};
}

Outcome two_sided_sandwich() {
  // Smallest alpha_0 with alpha_0 >= c_n0 + log_{17/16}(2 alpha_0).
  int alpha0 = static_cast<int>(std::ceil(c_n0()));
  while (alpha0 < c_n0() + std::log(2.0 * alpha0) / std::log(17.0 / 16.0)) ++alpha0;
  const WeightedSumSpec spec =
      WeightedSumSpec::make(Eigen::Vector2i(alpha0, alpha0), Eigen::Vector2d(1.0, 0.2));
  const double total = static_cast<double>(spec.total());
  // Tune mu so that total * Kinf = 2.
  double lo = spec.mean(), hi = spec.upper - 1e-9;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (total * kinf(spec, mid).value < 2.0 ? lo : hi) = mid;
  }
  const double mu = 0.5 * (lo + hi);
  const double exponent = total * kinf(spec, mu).value;
  Stream s(3003);
  const BoundCertificate c = certify_bounds(spec, mu, 10000000, s, workers());
  bool ok = c.preconditions_met && exponent >= 1.5 && exponent <= 3.0;
  const double w = c.wilson.half_width();
  if (ok) ok = c.mc_estimate >= *c.lower_bound - 3.0 * w && c.mc_estimate <= c.upper_bound + 3.0 * w;
  std::ostringstream d;
  d << "alpha0=" << alpha0 << " (c_n0=" << c_n0() << "), mu=" << mu << ", alpha*Kinf=" << exponent
    << ", lower=" << (c.lower_bound ? *c.lower_bound : -1.0) << " <= MC " << c.mc_estimate << " (w " << w
    << ") <= upper=" << c.upper_bound;
  return {ok, d.str()};
}

Outcome bernstein_tail() {
  Stream s(4004);
  int failures = 0, checks = 0;
  double worst = -1.0;
  for (int i = 0; i < 100; ++i) {
    const WeightedSumSpec spec = random_spec(s, 5, 20, true);
    for (double delta : {0.1, 0.01}) {
      const BernsteinReport r = bernstein_tail_check(spec, delta, 1000000, s, workers());
      ++checks;
      worst = std::max(worst, r.mc_estimate - delta - 3.0 * r.wilson.half_width());
      if (!r.passed) ++failures;
    }
  }
  std::ostringstream d;
  d << checks << " checks x 1e6 draws, " << failures << " failed, worst (est - delta - 3w) = " << worst;
  return {failures == 0, d.str()};
}

Outcome gridworld_ordering() {
  ExperimentConfig config;
  config.environment.type = "gridworld";
  config.environment.grid.rooms = 3;
  config.environment.horizon = 15;
  config.episodes = 5000;
  config.seeds = {0, 1, 2, 3};
  config.master_seed = 2022;
  config.workers = workers();
  for (auto [name, v] : std::vector<std::pair<std::string, Variant>>{
           {"bayes_ucbvi", Variant::bayes_ucbvi},
           {"incr_bayes_ucbvi", Variant::incr_bayes_ucbvi},
           {"ucbvi", Variant::ucbvi},
           {"rlsvi", Variant::rlsvi},
           {"psrl", Variant::psrl}}) {
    AgentConfig a;
    a.name = name;
    a.variant = v;
    a.n0 = 1;
    a.B = 64;
    a.pseudo_reward = 1.0;
    a.schedule.fixed_kappa = 0.85;
    config.agents.push_back(a);
  }
  const RunResult r = run_experiment(config);
  if (!r.ok()) return {false, "a cell failed"};
  const int T = config.episodes;
  std::map<std::string, double> final_regret, early_regret;
  for (const auto& cell : r.cells) {
    final_regret[cell.agent] += cell.regret.cumulative()[T - 1] / 4.0;
    early_regret[cell.agent] += cell.regret.cumulative()[T / 10 - 1] / 4.0;
  }
  const double ucb = final_regret["ucbvi"], rls = final_regret["rlsvi"],
               bayes = final_regret["bayes_ucbvi"], incr = final_regret["incr_bayes_ucbvi"],
               ps = final_regret["psrl"];
  const bool ordering = ucb > rls && rls > bayes;
  const bool close = std::abs(incr - ps) <= 0.25 * std::max(incr, ps);
  bool sublinear = true;
  std::ostringstream d;
  d << "mean regret(T): ucbvi " << ucb << ", rlsvi " << rls << ", bayes " << bayes << ", incr " << incr
    << ", psrl " << ps << "; rate ratio";
  for (const char* name : {"bayes_ucbvi", "incr_bayes_ucbvi", "psrl"}) {
    const double ratio = (final_regret[name] / T) / (early_regret[name] / (T / 10));
    sublinear = sublinear && ratio <= 0.6;
    d << ' ' << name << '=' << ratio;
  }
  d << " | order " << (ordering ? "ok" : "FAIL") << ", incr~psrl " << (close ? "ok" : "FAIL") << ", sublinear "
    << (sublinear ? "ok" : "FAIL");
  return {ordering && close && sublinear, d.str()};
}

Outcome total_variance() {
  Stream s(6006);
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const int H = 1 + static_cast<int>(s() % 5), S = 1 + static_cast<int>(s() % 5),
              A = 1 + static_cast<int>(s() % 3);
    const TabularMdp mdp = build_random_mdp(S, A, H, s());
    Policy pi(H, S);
    for (int h = 0; h < H; ++h) {
      for (int st = 0; st < S; ++st) pi(h, st) = static_cast<int>(s() % static_cast<std::uint64_t>(A));
    }
    const double mean = evaluate_policy(mdp, pi).v(0, mdp.initial_state());
    const double var = variance_values(mdp, pi).vvar(0, mdp.initial_state());
    double sq = 0.0;
    const int n = 100000;
    for (int k = 0; k < n; ++k) {
      double ret = 0.0;
      for (const Step& st : sample_episode(mdp, pi, s)) ret += st.reward;
      sq += (ret - mean) * (ret - mean);
    }
    const double rollout = sq / n;
    // A deterministic return has zero variance on both sides.
    const double rel = var == 0.0 ? rollout : std::abs(rollout - var) / var;
    worst = std::max(worst, rel);
  }
  std::ostringstream d;
  d << "20 random MDPs x 1e5 rollouts, worst relative error " << worst;
  return {worst <= 0.05, d.str()};
}

Outcome bootstrap_equivalence() {
  Stream s(7007);
  bool ok = true;
  std::ostringstream d;
  // Each case: n0 and a sequence of observed coordinates (coord 0 is the pseudo-state).
  const std::vector<std::pair<int, std::vector<int>>> cases{
      {0, {1, 2, 1, 3}}, {0, {2, 2, 2, 1, 3, 3}}, {1, {1, 1, 2}}, {1, {3, 1, 2, 2, 2, 1, 1}}};
  const Eigen::Vector4d f(1.0, 0.1, 0.6, 0.35);
  for (const auto& [n0, seq] : cases) {
    Eigen::VectorXi alpha = Eigen::VectorXi::Zero(4);
    alpha(0) = n0;
    for (int c : seq) ++alpha(c);
    const WeightedSumSpec spec = WeightedSumSpec::make(alpha, f);
    std::vector<double> incremental, fresh;
    for (int pair = 0; pair < 200; ++pair) {
      BootstrapEnsemble e = bootstrap_init(4, n0, 1, s, 0);
      for (int c : seq) e = bootstrap_observe(std::move(e), c, s);
      incremental.push_back(e.member_values(f)(0));
      fresh.push_back(sample_weighted_sum(spec, s));
    }
    const double ks = oracle::ks_statistic(incremental, fresh);
    const double crit = oracle::ks_critical(200, 200, 0.01);
    ok = ok && ks <= crit;
    d << "n0=" << n0 << " k=" << seq.size() << " KS=" << ks << "/" << crit << "; ";
  }
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 1 + static_cast<int>(s() % 20);
    Eigen::VectorXd z(n), y(n);
    for (int j = 0; j < n; ++j) {
      z(j) = standard_exponential(s);
      y(j) = s.uniform01();
    }
    const Eigen::VectorXd w = z / z.sum();
    worst = std::max(worst, std::abs(weighted_regression_mean(y, z) - w.dot(y)));
  }
  ok = ok && worst <= 1e-12;
  d << "regression identity max error " << worst;
  return {ok, d.str()};
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome determinism() {
  const auto dir = std::filesystem::temp_directory_path() / "dirx_acceptance";
  std::filesystem::create_directories(dir);
  const std::string config = (dir / "run.ini").string();
  {
    std::ofstream f(config);
    f << "[experiment]\nepisodes = 30\nseeds = 0,1,2\nmaster_seed = 9\noptimism_audit = true\n"
         "bernstein_audit = true\nworkers = 3\n\n[environment]\ntype = gridworld\nrooms = 3\n"
         "horizon = 15\n\n[agent b]\nvariant = bayes_ucbvi\n[agent i]\nvariant = incr_bayes_ucbvi\n"
         "[agent u]\nvariant = ucbvi\n[agent r]\nvariant = rlsvi\n[agent p]\nvariant = psrl\n";
  }
  const std::vector<std::vector<std::string>> commands{
      {"run", "--config", config, "--seed", "4"},
      {"verify-bounds", "--alpha", "3,2,4", "--f", "1,0.3,0.1", "--mu", "0.7", "--samples", "200000",
       "--seed", "5", "--workers", "3"},
      {"kinf", "--alpha", "3,2,4", "--f", "1,0.3,0.1", "--mu", "0.7"},
      {"quantile", "--alpha", "3,2,4", "--f", "1,0.3,0.1", "--kappa", "0.85", "-B", "64", "--seed", "6"},
      {"bernstein-check", "--random", "5", "--delta", "0.1,0.01", "--samples", "50000", "--seed", "7",
       "--workers", "2"}};
  bool ok = true;
  std::ostringstream d;
  for (const auto& cmd : commands) {
    std::string first, second, manifest_a, manifest_b;
    for (int rep = 0; rep < 2; ++rep) {
      // Same flags both times, output path included; read back before the rerun overwrites it.
      const std::string out = (dir / (cmd[0] + ".csv")).string();
      auto args = cmd;
      args.insert(args.end(), {"--output", out});
      std::ostringstream o, e;
      const int code = run_cli(args, o, e);
      if (code != kExitOk && code != kExitInconclusive) {
        ok = false;
        d << cmd[0] << " exited " << code << ": " << e.str();
      }
      (rep == 0 ? first : second) = slurp(out);
      if (cmd[0] == "run") (rep == 0 ? manifest_a : manifest_b) = slurp(out + ".manifest");
    }
    const bool same = !first.empty() && first == second && manifest_a == manifest_b;
    ok = ok && same;
    d << cmd[0] << (same ? " identical" : " DIFFERS") << " (" << first.size() << " bytes); ";
  }
  std::filesystem::remove_all(dir);
  return {ok, d.str()};
}

}  // namespace

// Optional arguments select criteria by number; default runs all of them.
int main(int argc, char** argv) {
  struct Criterion {
    const char* name;
    double limit_seconds;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"1 kinf oracle equivalence", 60, kinf_oracle_equivalence},
      {"2 upper-bound universality", 300, upper_bound_universality},
      {"3 two-sided sandwich", 600, two_sided_sandwich},
      {"4 Bernstein-Dirichlet tail", 300, bernstein_tail},
      {"5 gridworld regret ordering", 1200, gridworld_ordering},
      {"6 law of total variance", 300, total_variance},
      {"7 bootstrap equivalence", 120, bootstrap_equivalence},
      {"8 determinism", 1e9, determinism},
  };
  std::vector<bool> selected(criteria.size(), argc <= 1);
  for (int i = 1; i < argc; ++i) {
    const int k = std::atoi(argv[i]);
    if (k >= 1 && k <= static_cast<int>(criteria.size())) selected[k - 1] = true;
  }
  int failed = 0, ran = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!selected[i]) continue;
    const auto& c = criteria[i];
    ++ran;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < c.limit_seconds;
    const bool pass = o.pass && in_time;
    failed += pass ? 0 : 1;
    std::printf("%s criterion %s [%.1fs%s]: %s\n", pass ? "PASS" : "FAIL", c.name, secs,
                in_time ? "" : ", over time limit", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %d criteria passed\n", ran - failed, ran);
  return failed == 0 ? 0 : 1;
}
