#include "dirx/agents.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace dirx {

namespace {

const std::uint64_t kPlanPurpose = hash_name("plan");
const std::uint64_t kBootstrapInit = hash_name("bootstrap-init");
const std::uint64_t kBootstrapObserve = hash_name("bootstrap-observe");
const std::uint64_t kRewardResample = hash_name("reward-resample");

void check_dims(const CountsTable& counts, const ModelInfo& info) {
  if (counts.horizon() != info.H || counts.states() != info.S || counts.actions() != info.A) {
    throw StructuralError("counts table does not match model dimensions");
  }
  if (info.rewards.size() != static_cast<std::size_t>(info.H)) {
    throw StructuralError("model info needs one reward table per stage");
  }
}

double cell_kappa(const QuantileSchedule& schedule, const CountsTable& counts, const ModelInfo& info,
                  int h, int s, int a) {
  if (schedule.mode == QuantileSchedule::Mode::fixed) return schedule.fixed_kappa;
  return schedule.kappa(counts.visits(h, s, a), counts.pseudo_visits(h, s, a), info.S, info.A,
                        info.H);
}

// Pseudo-state row of an augmented table: V̄_h(s_0) = r̄ (H - h).
void fill_pseudo_row(ValueTable& table, int H, int pseudo, double pseudo_reward) {
  for (int h = 0; h < H; ++h) {
    table.v(h, pseudo) = pseudo_reward * (H - h);
    table.q[h].row(pseudo).setConstant(pseudo_reward * (H - h));
  }
}

// Upper rank used as a distribution-free 3-sigma slack for an order statistic.
std::size_t slack_rank(std::size_t rank, double kappa, std::size_t B) {
  const double spread = 3.0 * std::sqrt(static_cast<double>(B) * kappa * (1.0 - kappa));
  return std::min(B, rank + static_cast<std::size_t>(std::ceil(spread)));
}

}  // namespace

const char* to_string(Variant v) {
  switch (v) {
    case Variant::bayes_ucbvi: return "bayes_ucbvi";
    case Variant::incr_bayes_ucbvi: return "incr_bayes_ucbvi";
    case Variant::ucbvi: return "ucbvi";
    case Variant::rlsvi: return "rlsvi";
    case Variant::psrl: return "psrl";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  for (Variant v : {Variant::bayes_ucbvi, Variant::incr_bayes_ucbvi, Variant::ucbvi, Variant::rlsvi,
                    Variant::psrl}) {
    if (name == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown agent variant '" + name + "'");
}

bool uses_pseudo_state(Variant v) {
  return v == Variant::bayes_ucbvi || v == Variant::incr_bayes_ucbvi;
}

double QuantileSchedule::c_kappa() {
  const double e_pi = std::numbers::e * std::numbers::pi;
  return 1.0 / (5.0 * e_pi * e_pi * e_pi);
}

double QuantileSchedule::kappa(std::int64_t n, std::int64_t n_bar, int S, int A, int H) const {
  if (mode == Mode::fixed) return fixed_kappa;
  if (n_bar <= 0) throw DomainError("theoretical kappa needs a positive pseudo-count");
  const double odd = 2.0 * static_cast<double>(n) + 1.0;
  const double denom = static_cast<double>(S) * A * H * odd * odd * odd *
                       std::pow(static_cast<double>(n_bar), 1.5);
  const double k = 1.0 - c_kappa() * delta / denom;
  if (!(k > 0.0)) throw DomainError("theoretical kappa is not positive");
  return std::min(k, std::nextafter(1.0, 0.0));
}

double theoretical_kappa(const QuantileSchedule& schedule, std::int64_t n, std::int64_t n_bar,
                         int S, int A, int H) {
  QuantileSchedule s = schedule;
  s.mode = QuantileSchedule::Mode::theoretical;
  return s.kappa(n, n_bar, S, A, H);
}

void AgentConfig::validate() const {
  if (B < 1) throw std::invalid_argument("agent '" + name + "': B must be at least 1");
  if (n0 < 0) throw std::invalid_argument("agent '" + name + "': n0 must be nonnegative");
  if (!(schedule.fixed_kappa > 0.0 && schedule.fixed_kappa < 1.0)) {
    throw std::invalid_argument("agent '" + name + "': kappa must lie in (0, 1)");
  }
  if (!(schedule.delta > 0.0 && schedule.delta < 1.0)) {
    throw std::invalid_argument("agent '" + name + "': delta must lie in (0, 1)");
  }
  if (!(pseudo_reward >= 0.0)) {
    throw std::invalid_argument("agent '" + name + "': pseudo_reward must be nonnegative");
  }
}

ModelInfo ModelInfo::from(const TabularMdp& mdp) {
  ModelInfo info{mdp.horizon(), mdp.states(), mdp.actions(), {}};
  for (int h = 0; h < mdp.horizon(); ++h) info.rewards.push_back(mdp.rewards(h));
  return info;
}

CountsTable::CountsTable(int H, int S, int A, int n0)
    : H_(H), S_(S), A_(A), n0_(n0) {
  if (H < 1 || S < 1 || A < 1) throw StructuralError("counts table needs positive dimensions");
  if (n0 < 0) throw StructuralError("n0 must be nonnegative");
  const std::size_t cells = static_cast<std::size_t>(H) * S * A;
  visits_.assign(cells, 0);
  next_counts_.assign(cells, Eigen::VectorXi::Zero(S));
  observed_.resize(cells);
}

std::size_t CountsTable::cell(int h, int s, int a) const {
  return (static_cast<std::size_t>(h) * S_ + s) * A_ + a;
}

void CountsTable::check(int h, int s, int a) const {
  if (h < 0 || h >= H_ || s < 0 || s >= S_ || a < 0 || a >= A_) {
    throw StructuralError("count index (" + std::to_string(h) + ", " + std::to_string(s) + ", " +
                          std::to_string(a) + ") out of range");
  }
}

std::int64_t CountsTable::transitions(int h, int s, int a, int next) const {
  check(h, s, a);
  if (next == S_) return 0;
  return next_counts_[cell(h, s, a)](next);
}

Eigen::VectorXi CountsTable::pseudo_counts(int h, int s, int a) const {
  check(h, s, a);
  Eigen::VectorXi out(S_ + 1);
  out.head(S_) = next_counts_[cell(h, s, a)];
  out(S_) = n0_;
  return out;
}

Eigen::VectorXd CountsTable::pseudo_empirical(int h, int s, int a) const {
  const std::int64_t total = pseudo_visits(h, s, a);
  if (total <= 0) throw DomainError("pseudo-empirical distribution of an empty cell");
  return pseudo_counts(h, s, a).cast<double>() / static_cast<double>(total);
}

Eigen::VectorXd CountsTable::empirical(int h, int s, int a) const {
  check(h, s, a);
  const std::int64_t n = visits(h, s, a);
  if (n == 0) return Eigen::VectorXd::Constant(S_, 1.0 / S_);
  return next_counts_[cell(h, s, a)].cast<double>() / static_cast<double>(n);
}

void CountsTable::observe(int h, int s, int a, int next) {
  check(h, s, a);
  if (next < 0 || next >= S_) throw StructuralError("next state out of range");
  const std::size_t c = cell(h, s, a);
  if (next_counts_[c](next) == 0) observed_[c].push_back(next);
  ++next_counts_[c](next);
  ++visits_[c];
}

BetaRewardPosterior::BetaRewardPosterior(int H, int S, int A)
    : S_(S), A_(A),
      successes_(static_cast<std::size_t>(H) * S * A, 0),
      failures_(static_cast<std::size_t>(H) * S * A, 0) {}

void BetaRewardPosterior::observe(int h, int s, int a, bool success) {
  ++(success ? successes_ : failures_)[cell(h, s, a)];
}

double ucbvi_bonus(std::int64_t n, int H, int h) {
  const double remaining = static_cast<double>(H - h);
  if (n <= 0) return remaining;
  const double nd = static_cast<double>(n);
  return std::min(std::sqrt(1.0 / nd) + remaining / nd, remaining);
}

ValueTable plan_bayes_ucbvi(const CountsTable& counts, const ModelInfo& info,
                            const QuantileSchedule& schedule, int B, double pseudo_reward,
                            std::uint64_t stream_seed, PlanningAudit* audit) {
  check_dims(counts, info);
  if (B < 1) throw DomainError("plan_bayes_ucbvi: B must be positive");
  const int H = info.H;
  const int S = info.S;
  const int pseudo = counts.pseudo_state();
  ValueTable table(H, S + 1, info.A);
  fill_pseudo_row(table, H, pseudo, pseudo_reward);

  std::vector<double> samples(static_cast<std::size_t>(B));
  Eigen::VectorXi alpha;
  Eigen::VectorXd values;
  for (int h = H - 1; h >= 0; --h) {
    const auto next_v = table.v.row(h + 1);
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < info.A; ++a) {
        const std::int64_t n_bar = counts.pseudo_visits(h, s, a);
        if (n_bar <= 0) {
          throw PlanningError("no posterior at (h=" + std::to_string(h) + ", s=" +
                              std::to_string(s) + ", a=" + std::to_string(a) + ") with n0 = 0");
        }
        // Dirichlet over coordinates with positive pseudo-count only.
        const auto& seen = counts.observed(h, s, a);
        const Eigen::Index k = static_cast<Eigen::Index>(seen.size()) + (counts.n0() > 0 ? 1 : 0);
        alpha.resize(k);
        values.resize(k);
        Eigen::Index j = 0;
        if (counts.n0() > 0) {
          alpha(j) = counts.n0();
          values(j++) = next_v(pseudo);
        }
        for (int next : seen) {
          alpha(j) = static_cast<int>(counts.transitions(h, s, a, next));
          values(j++) = next_v(next);
        }
        const WeightedSumSpec spec{alpha, values, values.maxCoeff()};
        const double kappa = cell_kappa(schedule, counts, info, h, s, a);
        Stream stream = derive_stream(stream_seed, {static_cast<std::uint64_t>(h),
                                                    static_cast<std::uint64_t>(s),
                                                    static_cast<std::uint64_t>(a)});
        for (auto& x : samples) x = sample_weighted_sum(spec, stream);
        std::sort(samples.begin(), samples.end());
        const std::size_t rank = quantile_rank(kappa, samples.size());
        const double quantile = samples[rank - 1];
        table.q[h](s, a) = info.rewards[h](s, a) + quantile;

        if (audit) {
          const double log_term = std::log(1.0 / (1.0 - kappa));
          const double nb = static_cast<double>(n_bar);
          const double bound = spec.mean() + 2.0 * std::sqrt(spec.variance() * log_term / nb) +
                               2.0 * std::sqrt(2.0) * pseudo_reward * H * log_term / nb;
          const double slack = samples[slack_rank(rank, kappa, samples.size()) - 1] - quantile;
          ++audit->cells;
          if (quantile > bound + slack) ++audit->bernstein_violations;
        }
      }
      table.v(h, s) = table.q[h].row(s).maxCoeff();
    }
  }
  return table;
}

ValueTable plan_incr_bayes_ucbvi(const std::vector<BootstrapEnsemble>& ensembles,
                                 const CountsTable& counts, const ModelInfo& info,
                                 const QuantileSchedule& schedule, double pseudo_reward) {
  check_dims(counts, info);
  const int H = info.H;
  const int S = info.S;
  if (ensembles.size() != static_cast<std::size_t>(H) * S * info.A) {
    throw StructuralError("expected one bootstrap ensemble per (h, s, a)");
  }
  const int pseudo = counts.pseudo_state();
  ValueTable table(H, S + 1, info.A);
  fill_pseudo_row(table, H, pseudo, pseudo_reward);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd next_v = table.v.row(h + 1).transpose();
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < info.A; ++a) {
        const auto& ensemble = ensembles[(static_cast<std::size_t>(h) * S + s) * info.A + a];
        if (ensemble.degenerate()) {
          throw PlanningError("empty bootstrap ensemble at (h=" + std::to_string(h) + ", s=" +
                              std::to_string(s) + ", a=" + std::to_string(a) + ")");
        }
        const double kappa = cell_kappa(schedule, counts, info, h, s, a);
        table.q[h](s, a) = info.rewards[h](s, a) + bootstrap_quantile(ensemble, next_v, kappa);
      }
      table.v(h, s) = table.q[h].row(s).maxCoeff();
    }
  }
  return table;
}

ValueTable plan_ucbvi(const CountsTable& counts, const ModelInfo& info) {
  check_dims(counts, info);
  const int H = info.H;
  ValueTable table(H, info.S, info.A);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd next_v = table.v.row(h + 1).transpose();
    for (int s = 0; s < info.S; ++s) {
      for (int a = 0; a < info.A; ++a) {
        table.q[h](s, a) = info.rewards[h](s, a) + counts.empirical(h, s, a).dot(next_v) +
                           ucbvi_bonus(counts.visits(h, s, a), H, h);
      }
      table.v(h, s) = std::clamp(table.q[h].row(s).maxCoeff(), 0.0, static_cast<double>(H - h));
    }
  }
  return table;
}

ValueTable plan_rlsvi(const CountsTable& counts, const ModelInfo& info, std::uint64_t stream_seed,
                      bool clip) {
  check_dims(counts, info);
  const int H = info.H;
  ValueTable table(H, info.S, info.A);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd next_v = table.v.row(h + 1).transpose();
    for (int s = 0; s < info.S; ++s) {
      for (int a = 0; a < info.A; ++a) {
        Stream stream = derive_stream(stream_seed, {static_cast<std::uint64_t>(h),
                                                    static_cast<std::uint64_t>(s),
                                                    static_cast<std::uint64_t>(a)});
        const double noise = ucbvi_bonus(counts.visits(h, s, a), H, h) * standard_normal(stream);
        table.q[h](s, a) = info.rewards[h](s, a) + counts.empirical(h, s, a).dot(next_v) + noise;
      }
      const double best = table.q[h].row(s).maxCoeff();
      table.v(h, s) = clip ? std::clamp(best, 0.0, static_cast<double>(H - h)) : best;
    }
  }
  return table;
}

void sample_psrl_transition(const CountsTable& counts, int h, int s, int a, Stream& stream,
                            Eigen::VectorXd& out) {
  const int S = counts.states();
  const double prior = 1.0 / S;
  out.resize(S);
  for (int t = 0; t < S; ++t) {
    out(t) = gamma_real(prior + static_cast<double>(counts.transitions(h, s, a, t)), stream);
  }
  out /= out.sum();
}

ValueTable plan_psrl(const CountsTable& counts, const BetaRewardPosterior& rewards,
                     const ModelInfo& info, std::uint64_t stream_seed) {
  check_dims(counts, info);
  const int H = info.H;
  const int S = info.S;
  ValueTable table(H, S, info.A);
  Eigen::VectorXd p(S);
  for (int h = H - 1; h >= 0; --h) {
    const Eigen::VectorXd next_v = table.v.row(h + 1).transpose();
    for (int s = 0; s < S; ++s) {
      for (int a = 0; a < info.A; ++a) {
        Stream stream = derive_stream(stream_seed, {static_cast<std::uint64_t>(h),
                                                    static_cast<std::uint64_t>(s),
                                                    static_cast<std::uint64_t>(a)});
        sample_psrl_transition(counts, h, s, a, stream, p);
        const double g1 = gamma_real(1.0 + static_cast<double>(rewards.successes(h, s, a)), stream);
        const double g0 = gamma_real(1.0 + static_cast<double>(rewards.failures(h, s, a)), stream);
        table.q[h](s, a) = g1 / (g1 + g0) + p.dot(next_v);
      }
      table.v(h, s) = table.q[h].row(s).maxCoeff();
    }
  }
  return table;
}

int act(const ValueTable& table, int s, int h) { return argmax_lowest(table.q[h].row(s)); }

Policy greedy_policy(const ValueTable& table, int states) {
  Policy policy(table.horizon(), states);
  for (int h = 0; h < table.horizon(); ++h) {
    for (int s = 0; s < states; ++s) policy(h, s) = act(table, s, h);
  }
  return policy;
}

Agent::Agent(AgentConfig config, ModelInfo info)
    : config_(std::move(config)),
      info_(std::move(info)),
      counts_(info_.H, info_.S, info_.A, uses_pseudo_state(config_.variant) ? config_.n0 : 0),
      values_(std::make_unique<ValueTable>(info_.H, info_.S, info_.A)) {
  config_.validate();
}

void Agent::plan(int episode, PlanningAudit* audit) {
  const std::uint64_t seed =
      derive_seed(config_.seed, {kPlanPurpose, static_cast<std::uint64_t>(episode)});
  values_ = std::make_unique<ValueTable>(compute_plan(seed, audit));
}

void Agent::observe(const Step& step) {
  counts_.observe(step.h, step.state, step.action, step.next_state);
}

namespace {

class BayesUcbviAgent final : public Agent {
 public:
  using Agent::Agent;

 protected:
  ValueTable compute_plan(std::uint64_t seed, PlanningAudit* audit) override {
    return plan_bayes_ucbvi(counts_, info_, config_.schedule, config_.B, config_.pseudo_reward,
                            seed, audit);
  }
};

class IncrBayesUcbviAgent final : public Agent {
 public:
  IncrBayesUcbviAgent(AgentConfig config, ModelInfo info)
      : Agent(std::move(config), std::move(info)),
        observe_stream_(derive_stream(config_.seed, {kBootstrapObserve})) {
    const int H = info_.H, S = info_.S, A = info_.A;
    ensembles_.reserve(static_cast<std::size_t>(H) * S * A);
    for (int h = 0; h < H; ++h) {
      for (int s = 0; s < S; ++s) {
        for (int a = 0; a < A; ++a) {
          Stream init = derive_stream(config_.seed, {kBootstrapInit, static_cast<std::uint64_t>(h),
                                                     static_cast<std::uint64_t>(s),
                                                     static_cast<std::uint64_t>(a)});
          ensembles_.push_back(bootstrap_init(S + 1, config_.n0, config_.B, init, S));
        }
      }
    }
  }

  void observe(const Step& step) override {
    Agent::observe(step);
    ensembles_[(static_cast<std::size_t>(step.h) * info_.S + step.state) * info_.A + step.action]
        .observe(step.next_state, observe_stream_);
  }

 protected:
  ValueTable compute_plan(std::uint64_t, PlanningAudit*) override {
    return plan_incr_bayes_ucbvi(ensembles_, counts_, info_, config_.schedule,
                                 config_.pseudo_reward);
  }

 private:
  std::vector<BootstrapEnsemble> ensembles_;
  Stream observe_stream_;
};

class UcbviAgent final : public Agent {
 public:
  using Agent::Agent;

 protected:
  ValueTable compute_plan(std::uint64_t, PlanningAudit*) override {
    return plan_ucbvi(counts_, info_);
  }
};

class RlsviAgent final : public Agent {
 public:
  using Agent::Agent;

 protected:
  ValueTable compute_plan(std::uint64_t seed, PlanningAudit*) override {
    return plan_rlsvi(counts_, info_, seed, config_.clip_rlsvi);
  }
};

class PsrlAgent final : public Agent {
 public:
  PsrlAgent(AgentConfig config, ModelInfo info)
      : Agent(std::move(config), std::move(info)),
        rewards_(info_.H, info_.S, info_.A),
        reward_stream_(derive_stream(config_.seed, {kRewardResample})) {}

  void observe(const Step& step) override {
    Agent::observe(step);
    const double r = info_.rewards[step.h](step.state, step.action);
    rewards_.observe(step.h, step.state, step.action, reward_stream_.uniform01() < r);
  }

 protected:
  ValueTable compute_plan(std::uint64_t seed, PlanningAudit*) override {
    return plan_psrl(counts_, rewards_, info_, seed);
  }

 private:
  BetaRewardPosterior rewards_;
  Stream reward_stream_;
};

}  // namespace

std::unique_ptr<Agent> make_agent(const AgentConfig& config, const ModelInfo& info) {
  switch (config.variant) {
    case Variant::bayes_ucbvi: return std::make_unique<BayesUcbviAgent>(config, info);
    case Variant::incr_bayes_ucbvi: return std::make_unique<IncrBayesUcbviAgent>(config, info);
    case Variant::ucbvi: return std::make_unique<UcbviAgent>(config, info);
    case Variant::rlsvi: return std::make_unique<RlsviAgent>(config, info);
    case Variant::psrl: return std::make_unique<PsrlAgent>(config, info);
  }
  throw std::invalid_argument("unknown agent variant");
}

}  // namespace dirx
