#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dirx/random.hpp"

namespace dirx {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Integer Dirichlet parameter paired with a value vector.
///
/// `upper` is the bound b̄ on the values used by Kinf and the boundary
/// crossing bounds. make() takes the maximum over every coordinate (support
/// or not); with_upper() lets planners pin it to the pseudo-state value.
struct WeightedSumSpec {
  Eigen::VectorXi alpha;
  Eigen::VectorXd values;
  double upper = 0.0;

  static WeightedSumSpec make(Eigen::VectorXi alpha, Eigen::VectorXd values);
  static WeightedSumSpec with_upper(Eigen::VectorXi alpha, Eigen::VectorXd values, double upper);

  Eigen::Index size() const { return alpha.size(); }
  std::int64_t total() const;
  /// p̄ = alpha / total.
  Eigen::VectorXd mean_weights() const;
  /// p̄ f.
  double mean() const;
  /// Var under p̄ of f.
  double variance() const;
};

struct KinfResult {
  double value = 0.0;
  double lambda_star = 0.0;
  bool converged = true;
  int iterations = 0;
};

/// E_p[log(1 - lambda (f - mu) / (upper - mu))].
double kinf_objective(const Eigen::VectorXd& p, const Eigen::VectorXd& f, double upper, double mu,
                      double lambda);

/// Minimal KL divergence from p to a distribution with mean of f at least mu,
/// computed through its variational form as a concave maximization over
/// lambda in [0, 1] by bisection on the derivative.
KinfResult kinf(const Eigen::VectorXd& p, const Eigen::VectorXd& f, double upper, double mu);
KinfResult kinf(const WeightedSumSpec& spec, double mu);

/// Draw from Dir(alpha); zero parameters give exactly-zero coordinates.
Eigen::VectorXd sample_dirichlet(const Eigen::VectorXi& alpha, Stream& stream);

/// One draw of w f with w ~ Dir(alpha).
double sample_weighted_sum(const WeightedSumSpec& spec, Stream& stream);

/// 1-based rank ⌈kappa B⌉ of the order statistic used as the kappa-quantile.
std::size_t quantile_rank(double kappa, std::size_t count);

/// Sorts `values` and returns the order statistic at quantile_rank(kappa).
double order_statistic(std::vector<double>& values, double kappa);

/// Empirical kappa-quantile of w f over B fresh Dirichlet draws.
double exact_quantile_mc(const WeightedSumSpec& spec, double kappa, int B, Stream& stream);

/// Persistent exponential weights Z^b over a support of next states.
///
/// Only coordinates that have received mass are stored (weights is
/// members x support().size()), which keeps per-cell memory proportional to
/// the number of distinct observed outcomes.
class BootstrapEnsemble {
 public:
  BootstrapEnsemble(Eigen::Index support_size, int members);

  int members() const { return members_; }
  Eigen::Index support_size() const { return support_size_; }
  const std::vector<Eigen::Index>& support() const { return support_; }
  const Eigen::MatrixXd& weights() const { return weights_; }

  double weight(int member, Eigen::Index coord) const;
  double total(int member) const;
  Eigen::VectorXd normalized(int member) const;
  bool degenerate() const { return support_.empty(); }

  /// Adds n fresh unit exponentials per member to one coordinate
  /// (a single Gamma(n, 1) increment when n > 1).
  void observe(Eigen::Index coord, Stream& stream, std::int64_t n = 1);

  /// rows: members; entry b is Σ_j (Z^b_j / Σ Z^b) f(j).
  Eigen::VectorXd member_values(const Eigen::VectorXd& f) const;

 private:
  Eigen::Index column_of(Eigen::Index coord);

  Eigen::Index support_size_;
  int members_;
  std::vector<Eigen::Index> support_;
  Eigen::MatrixXd weights_;
};

BootstrapEnsemble bootstrap_init(Eigen::Index support_size, int n0, int B, Stream& stream,
                                 Eigen::Index pseudo_coord = 0);
BootstrapEnsemble bootstrap_observe(BootstrapEnsemble ensemble, Eigen::Index coord,
                                    Stream& stream);
double bootstrap_quantile(const BootstrapEnsemble& ensemble, const Eigen::VectorXd& f,
                          double kappa);

/// Closed-form minimizer of Σ z_n (x - y_n)^2.
template <typename T, typename W>
double weighted_regression_mean(const Eigen::MatrixBase<T>& targets,
                                const Eigen::MatrixBase<W>& weights) {
  if (targets.size() != weights.size()) throw DomainError("targets and weights differ in length");
  if ((weights.array() < 0.0).any()) throw DomainError("weights must be nonnegative");
  const double total = weights.sum();
  if (!(total > 0.0)) throw DomainError("zero total regression weight");
  return weights.dot(targets) / total;
}

/// Anti-concentration constant c_{n0} for the lower boundary-crossing bound.
double c_n0();

/// exp(-ᾱ Kinf(p̄, mu, f)).
double boundary_upper_bound(const WeightedSumSpec& spec, double mu);

struct LowerBoundPreconditions {
  bool met = false;
  std::string reason;  // empty when met
};

LowerBoundPreconditions lower_bound_preconditions(const WeightedSumSpec& spec, double mu);

/// exp(-ᾱ Kinf - 1.5 log ᾱ); nullopt when the preconditions fail.
std::optional<double> boundary_lower_bound(const WeightedSumSpec& spec, double mu);

struct WilsonInterval {
  double lo = 0.0;
  double hi = 1.0;
  double half_width() const { return 0.5 * (hi - lo); }
};

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z = 3.0);

/// Number of draws with w f >= mu out of `samples`.
///
/// workers == 1 consumes `stream` directly and is the canonical result. With
/// more workers one seed is drawn from `stream` and worker i samples its
/// contiguous share from derive_stream(seed, {i}).
std::int64_t count_tail(const WeightedSumSpec& spec, double mu, std::int64_t samples,
                        Stream& stream, int workers = 1);

enum class Verdict { pass, violation, inconclusive };
const char* to_string(Verdict v);

struct BoundCertificate {
  WeightedSumSpec spec;
  double mu = 0.0;
  double mc_estimate = 0.0;
  std::int64_t mc_samples = 0;
  WilsonInterval wilson;
  double upper_bound = 1.0;
  std::optional<double> lower_bound;
  bool preconditions_met = false;
  /// Sandwich holds up to the interval: wilson.lo <= upper and, when the
  /// lower bound applies, wilson.hi >= lower.
  bool holds = false;
  Verdict verdict = Verdict::inconclusive;
};

BoundCertificate certify_bounds(const WeightedSumSpec& spec, double mu, std::int64_t mc_samples,
                                Stream& stream, int workers = 1);

/// p̄f + 2 sqrt(Var log(1/δ) / ᾱ) + 2 sqrt(2) b̄ log(1/δ) / ᾱ.
double bernstein_threshold(const WeightedSumSpec& spec, double delta);

struct BernsteinReport {
  WeightedSumSpec spec;
  double delta = 0.0;
  double threshold = 0.0;
  double mc_estimate = 0.0;
  std::int64_t mc_samples = 0;
  WilsonInterval wilson;
  bool passed = false;
};

BernsteinReport bernstein_tail_check(const WeightedSumSpec& spec, double delta,
                                     std::int64_t mc_samples, Stream& stream, int workers = 1);

/// Random spec with 2..max_support coordinates and alpha_j in [0, max_alpha]
/// (at least one positive). With pseudo_top, f(0) = 1 and the other values are
/// Uniform[0, 1); otherwise all values are Uniform[0, 1].
WeightedSumSpec random_spec(Stream& stream, int max_support, int max_alpha, bool pseudo_top);

std::string certificate_csv_header();
std::string to_csv_row(const BoundCertificate& cert);
std::string to_csv_row(const BernsteinReport& report);

}  // namespace dirx
