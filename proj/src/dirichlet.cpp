#include "dirx/dirichlet.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <thread>

#include "dirx/format.hpp"

namespace dirx {

namespace {

constexpr double kLambdaTolerance = 1e-12;
constexpr double kLambdaCap = 1.0 - 1e-15;
constexpr int kMaxBisections = 200;

void validate_spec(const WeightedSumSpec& spec) {
  if (spec.alpha.size() == 0 || spec.alpha.size() != spec.values.size()) {
    throw DomainError("alpha and values must be nonempty and of equal length");
  }
  if ((spec.alpha.array() < 0).any()) throw DomainError("alpha must be nonnegative");
  if ((spec.alpha.array() == 0).all()) throw DomainError("alpha must have a positive entry");
  if (!spec.values.allFinite() || (spec.values.array() < 0.0).any()) {
    throw DomainError("values must be finite and nonnegative");
  }
  if (!(spec.upper >= spec.values.maxCoeff())) {
    throw DomainError("upper value is below max f");
  }
}

// d/dlambda of the variational objective; nonincreasing in lambda.
double kinf_derivative(const Eigen::VectorXd& p, const Eigen::VectorXd& x, double lambda) {
  double d = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) d -= p(i) * x(i) / (1.0 - lambda * x(i));
  }
  return d;
}

}  // namespace

WeightedSumSpec WeightedSumSpec::make(Eigen::VectorXi alpha, Eigen::VectorXd values) {
  const double upper = values.size() > 0 ? values.maxCoeff() : 0.0;
  return with_upper(std::move(alpha), std::move(values), upper);
}

WeightedSumSpec WeightedSumSpec::with_upper(Eigen::VectorXi alpha, Eigen::VectorXd values,
                                            double upper) {
  WeightedSumSpec spec{std::move(alpha), std::move(values), upper};
  validate_spec(spec);
  return spec;
}

std::int64_t WeightedSumSpec::total() const { return alpha.cast<std::int64_t>().sum(); }

Eigen::VectorXd WeightedSumSpec::mean_weights() const {
  return alpha.cast<double>() / static_cast<double>(total());
}

double WeightedSumSpec::mean() const { return mean_weights().dot(values); }

double WeightedSumSpec::variance() const {
  const Eigen::VectorXd p = mean_weights();
  const double m = p.dot(values);
  return std::max(0.0, p.dot((values.array() - m).square().matrix()));
}

double kinf_objective(const Eigen::VectorXd& p, const Eigen::VectorXd& f, double upper, double mu,
                      double lambda) {
  double g = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p(i) > 0.0) g += p(i) * std::log1p(-lambda * (f(i) - mu) / (upper - mu));
  }
  return g;
}

KinfResult kinf(const Eigen::VectorXd& p, const Eigen::VectorXd& f, double upper, double mu) {
  if (p.size() == 0 || p.size() != f.size()) throw DomainError("kinf: empty or mismatched support");
  if (!(p.array() > 0.0).any()) throw DomainError("kinf: empty support");
  if (!(mu >= 0.0)) throw DomainError("kinf: mu must be nonnegative");
  if (!(mu < upper)) throw DomainError("kinf: transportation target unattainable (mu >= upper)");

  const Eigen::VectorXd x = (f.array() - mu) / (upper - mu);
  KinfResult out;
  if (kinf_derivative(p, x, 0.0) <= 0.0) return out;  // mu <= p f

  bool mass_at_top = false;
  for (Eigen::Index i = 0; i < p.size(); ++i) mass_at_top |= (p(i) > 0.0 && x(i) >= 1.0);
  const double cap = mass_at_top ? kLambdaCap : 1.0;

  if (kinf_derivative(p, x, cap) >= 0.0) {
    out.lambda_star = cap;
  } else {
    double lo = 0.0;
    double hi = cap;
    out.converged = false;
    while (out.iterations < kMaxBisections) {
      ++out.iterations;
      const double mid = 0.5 * (lo + hi);
      if (kinf_derivative(p, x, mid) > 0.0) {
        lo = mid;
      } else {
        hi = mid;
      }
      if (hi - lo <= kLambdaTolerance) {
        out.converged = true;
        break;
      }
    }
    out.lambda_star = 0.5 * (lo + hi);
  }
  out.value = std::max(0.0, kinf_objective(p, f, upper, mu, out.lambda_star));
  return out;
}

KinfResult kinf(const WeightedSumSpec& spec, double mu) {
  return kinf(spec.mean_weights(), spec.values, spec.upper, mu);
}

Eigen::VectorXd sample_dirichlet(const Eigen::VectorXi& alpha, Stream& stream) {
  if ((alpha.array() < 0).any()) throw DomainError("sample_dirichlet: negative parameter");
  if (alpha.size() == 0 || alpha.sum() < 1) throw DomainError("sample_dirichlet: all-zero alpha");
  Eigen::VectorXd w(alpha.size());
  for (Eigen::Index i = 0; i < alpha.size(); ++i) w(i) = gamma_integer(alpha(i), stream);
  return w / w.sum();
}

double sample_weighted_sum(const WeightedSumSpec& spec, Stream& stream) {
  thread_local std::vector<double> gammas;
  const Eigen::Index n = spec.size();
  gammas.resize(static_cast<std::size_t>(n));
  double total = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    gammas[i] = gamma_integer(spec.alpha(i), stream);
    total += gammas[i];
  }
  // Normalizing before the dot product keeps a point mass exactly on f.
  double out = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) out += gammas[i] / total * spec.values(i);
  return out;
}

std::size_t quantile_rank(double kappa, std::size_t count) {
  if (!(kappa > 0.0 && kappa < 1.0)) throw DomainError("quantile order must lie in (0, 1)");
  if (count == 0) throw DomainError("quantile of an empty sample");
  // The small guard keeps products such as 0.9 * 10 from rounding up a rank.
  const double raw = std::ceil(kappa * static_cast<double>(count) - 1e-9);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, count);
}

double order_statistic(std::vector<double>& values, double kappa) {
  const std::size_t rank = quantile_rank(kappa, values.size());
  std::sort(values.begin(), values.end());
  return values[rank - 1];
}

double exact_quantile_mc(const WeightedSumSpec& spec, double kappa, int B, Stream& stream) {
  if (B < 1) throw DomainError("exact_quantile_mc: B must be positive");
  quantile_rank(kappa, static_cast<std::size_t>(B));
  std::vector<double> xs(static_cast<std::size_t>(B));
  for (auto& x : xs) x = sample_weighted_sum(spec, stream);
  return order_statistic(xs, kappa);
}

BootstrapEnsemble::BootstrapEnsemble(Eigen::Index support_size, int members)
    : support_size_(support_size), members_(members), weights_(members, 0) {
  if (members < 1) throw DomainError("bootstrap ensemble needs at least one member");
  if (support_size < 1) throw DomainError("bootstrap support must be nonempty");
}

double BootstrapEnsemble::weight(int member, Eigen::Index coord) const {
  for (std::size_t j = 0; j < support_.size(); ++j) {
    if (support_[j] == coord) return weights_(member, static_cast<Eigen::Index>(j));
  }
  return 0.0;
}

double BootstrapEnsemble::total(int member) const { return weights_.row(member).sum(); }

Eigen::VectorXd BootstrapEnsemble::normalized(int member) const {
  if (degenerate()) throw DomainError("bootstrap ensemble has no mass");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(support_size_);
  const double t = total(member);
  for (std::size_t j = 0; j < support_.size(); ++j) {
    out(support_[j]) = weights_(member, static_cast<Eigen::Index>(j)) / t;
  }
  return out;
}

Eigen::Index BootstrapEnsemble::column_of(Eigen::Index coord) {
  for (std::size_t j = 0; j < support_.size(); ++j) {
    if (support_[j] == coord) return static_cast<Eigen::Index>(j);
  }
  support_.push_back(coord);
  weights_.conservativeResize(Eigen::NoChange, weights_.cols() + 1);
  weights_.col(weights_.cols() - 1).setZero();
  return weights_.cols() - 1;
}

void BootstrapEnsemble::observe(Eigen::Index coord, Stream& stream, std::int64_t n) {
  if (coord < 0 || coord >= support_size_) throw DomainError("bootstrap coordinate out of range");
  if (n <= 0) return;
  const Eigen::Index col = column_of(coord);
  for (int b = 0; b < members_; ++b) {
    weights_(b, col) += n == 1 ? standard_exponential(stream) : gamma_integer(n, stream);
  }
}

Eigen::VectorXd BootstrapEnsemble::member_values(const Eigen::VectorXd& f) const {
  if (degenerate()) throw DomainError("bootstrap ensemble has no mass");
  if (f.size() != support_size_) throw DomainError("value vector does not match support");
  Eigen::VectorXd fs(static_cast<Eigen::Index>(support_.size()));
  for (std::size_t j = 0; j < support_.size(); ++j) fs(static_cast<Eigen::Index>(j)) = f(support_[j]);
  Eigen::VectorXd out(members_);
  for (int b = 0; b < members_; ++b) {
    const auto row = weights_.row(b);
    out(b) = (row / row.sum()).dot(fs.transpose());
  }
  return out;
}

BootstrapEnsemble bootstrap_init(Eigen::Index support_size, int n0, int B, Stream& stream,
                                 Eigen::Index pseudo_coord) {
  if (n0 < 0) throw DomainError("bootstrap_init: n0 must be nonnegative");
  BootstrapEnsemble ensemble(support_size, B);
  ensemble.observe(pseudo_coord, stream, n0);
  return ensemble;
}

BootstrapEnsemble bootstrap_observe(BootstrapEnsemble ensemble, Eigen::Index coord,
                                    Stream& stream) {
  ensemble.observe(coord, stream);
  return ensemble;
}

double bootstrap_quantile(const BootstrapEnsemble& ensemble, const Eigen::VectorXd& f,
                          double kappa) {
  const Eigen::VectorXd xs = ensemble.member_values(f);
  std::vector<double> values(xs.begin(), xs.end());
  return order_statistic(values, kappa);
}

double c_n0() {
  const double pi = std::numbers::pi;
  const double log_ratio = std::log(17.0 / 16.0);
  const double root = std::sqrt(2.0 * pi) - 1.0;
  const double inner = 2.0 * std::sqrt(2.0) / std::sqrt(log_ratio) + 98.0 * std::sqrt(6.0) / 9.0;
  return inner * inner / (root * root) + std::log(10.0 * pi) / log_ratio;
}

double boundary_upper_bound(const WeightedSumSpec& spec, double mu) {
  return std::exp(-static_cast<double>(spec.total()) * kinf(spec, mu).value);
}

LowerBoundPreconditions lower_bound_preconditions(const WeightedSumSpec& spec, double mu) {
  LowerBoundPreconditions out;
  const double total = static_cast<double>(spec.total());
  const double alpha0 = spec.alpha(0);
  const double needed = c_n0() + std::log(total) / std::log(17.0 / 16.0);
  if (spec.size() < 2) {
    out.reason = "needs at least two coordinates";
  } else if (alpha0 < needed) {
    out.reason = "alpha_0 = " + format_double(alpha0) + " below " + format_double(needed);
  } else if (total < 2.0 * alpha0) {
    out.reason = "total alpha below 2 alpha_0";
  } else if (spec.values(0) != spec.upper) {
    out.reason = "f(0) differs from the upper value";
  } else if (!(spec.values.tail(spec.size() - 1).maxCoeff() < 0.5 * spec.upper)) {
    out.reason = "f(j) for j >= 1 must stay below half the upper value";
  } else if (!(mu > spec.mean() && mu < spec.upper)) {
    out.reason = "mu outside (p f, upper)";
  } else {
    out.met = true;
  }
  return out;
}

std::optional<double> boundary_lower_bound(const WeightedSumSpec& spec, double mu) {
  if (!lower_bound_preconditions(spec, mu).met) return std::nullopt;
  const double total = static_cast<double>(spec.total());
  return std::exp(-total * kinf(spec, mu).value - 1.5 * std::log(total));
}

WilsonInterval wilson_interval(std::int64_t successes, std::int64_t trials, double z) {
  if (trials <= 0) return {};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / n;
  const double center = (p + z2 / (2.0 * n)) / denom;
  const double half = z / denom * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
  return {std::clamp(std::min(center - half, p), 0.0, 1.0),
          std::clamp(std::max(center + half, p), 0.0, 1.0)};
}

std::int64_t count_tail(const WeightedSumSpec& spec, double mu, std::int64_t samples,
                        Stream& stream, int workers) {
  auto run = [&spec, mu](std::int64_t n, Stream& s) {
    std::int64_t hits = 0;
    for (std::int64_t i = 0; i < n; ++i) hits += sample_weighted_sum(spec, s) >= mu ? 1 : 0;
    return hits;
  };
  if (workers <= 1) return run(samples, stream);

  const std::uint64_t base = stream();
  std::vector<std::int64_t> hits(static_cast<std::size_t>(workers), 0);
  std::vector<std::thread> threads;
  for (int w = 0; w < workers; ++w) {
    const std::int64_t share = samples / workers + (w < samples % workers ? 1 : 0);
    threads.emplace_back([&, w, share] {
      Stream sub = derive_stream(base, {static_cast<std::uint64_t>(w)});
      hits[static_cast<std::size_t>(w)] = run(share, sub);
    });
  }
  for (auto& t : threads) t.join();
  std::int64_t sum = 0;
  for (auto h : hits) sum += h;
  return sum;
}

const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::violation: return "violation";
    case Verdict::inconclusive: return "inconclusive";
  }
  return "inconclusive";
}

BoundCertificate certify_bounds(const WeightedSumSpec& spec, double mu, std::int64_t mc_samples,
                                Stream& stream, int workers) {
  if (mc_samples < 10000) throw DomainError("certify_bounds needs at least 1e4 samples");
  BoundCertificate cert;
  cert.spec = spec;
  cert.mu = mu;
  cert.mc_samples = mc_samples;
  cert.upper_bound = boundary_upper_bound(spec, mu);
  cert.lower_bound = boundary_lower_bound(spec, mu);
  cert.preconditions_met = cert.lower_bound.has_value();

  const std::int64_t hits = count_tail(spec, mu, mc_samples, stream, workers);
  cert.mc_estimate = static_cast<double>(hits) / static_cast<double>(mc_samples);
  cert.wilson = wilson_interval(hits, mc_samples);

  bool violated = cert.wilson.lo > cert.upper_bound;
  bool certified = cert.wilson.hi <= cert.upper_bound;
  cert.holds = cert.wilson.lo <= cert.upper_bound;
  if (cert.lower_bound) {
    violated |= cert.wilson.hi < *cert.lower_bound;
    certified &= cert.wilson.lo >= *cert.lower_bound;
    cert.holds &= cert.wilson.hi >= *cert.lower_bound;
  }
  cert.verdict = violated ? Verdict::violation : certified ? Verdict::pass : Verdict::inconclusive;
  return cert;
}

double bernstein_threshold(const WeightedSumSpec& spec, double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw DomainError("delta must lie in (0, 1)");
  const double total = static_cast<double>(spec.total());
  const double log_term = std::log(1.0 / delta);
  return spec.mean() + 2.0 * std::sqrt(spec.variance() * log_term / total) +
         2.0 * std::sqrt(2.0) * spec.upper * log_term / total;
}

BernsteinReport bernstein_tail_check(const WeightedSumSpec& spec, double delta,
                                     std::int64_t mc_samples, Stream& stream, int workers) {
  if (spec.values(0) != spec.upper) throw DomainError("bernstein check needs f(0) = upper");
  if (mc_samples < 1) throw DomainError("bernstein check needs samples");
  BernsteinReport report;
  report.spec = spec;
  report.delta = delta;
  report.threshold = bernstein_threshold(spec, delta);
  report.mc_samples = mc_samples;
  const std::int64_t hits = count_tail(spec, report.threshold, mc_samples, stream, workers);
  report.mc_estimate = static_cast<double>(hits) / static_cast<double>(mc_samples);
  report.wilson = wilson_interval(hits, mc_samples);
  report.passed = report.mc_estimate <= delta + report.wilson.half_width();
  return report;
}

WeightedSumSpec random_spec(Stream& stream, int max_support, int max_alpha, bool pseudo_top) {
  if (max_support < 2 || max_alpha < 1) throw DomainError("random_spec: bad limits");
  const int size = 2 + static_cast<int>(stream() % static_cast<std::uint64_t>(max_support - 1));
  Eigen::VectorXi alpha(size);
  Eigen::VectorXd values(size);
  for (int j = 0; j < size; ++j) {
    alpha(j) = static_cast<int>(stream() % static_cast<std::uint64_t>(max_alpha + 1));
    values(j) = stream.uniform01();
  }
  if (alpha.sum() == 0) alpha(0) = 1;
  if (pseudo_top) {
    values(0) = 1.0;
    return WeightedSumSpec::with_upper(std::move(alpha), std::move(values), 1.0);
  }
  return WeightedSumSpec::make(std::move(alpha), std::move(values));
}

std::string certificate_csv_header() {
  return "alpha;f;mu;kappa_or_delta;mc_estimate;wilson_lo;wilson_hi;upper;lower;applicable;verdict";
}

std::string to_csv_row(const BoundCertificate& cert) {
  std::string row = join(cert.spec.alpha) + ';' + join(cert.spec.values) + ';' +
                    format_double(cert.mu) + ";NA;" + format_double(cert.mc_estimate) + ';' +
                    format_double(cert.wilson.lo) + ';' + format_double(cert.wilson.hi) + ';' +
                    format_double(cert.upper_bound) + ';';
  row += cert.lower_bound ? format_double(*cert.lower_bound) : std::string("NA");
  row += cert.preconditions_met ? ";true;" : ";false;";
  row += to_string(cert.verdict);
  return row;
}

std::string to_csv_row(const BernsteinReport& report) {
  return join(report.spec.alpha) + ';' + join(report.spec.values) + ';' +
         format_double(report.threshold) + ';' + format_double(report.delta) + ';' +
         format_double(report.mc_estimate) + ';' + format_double(report.wilson.lo) + ';' +
         format_double(report.wilson.hi) + ';' + format_double(report.delta) + ";NA;true;" +
         (report.passed ? "pass" : "violation");
}

}  // namespace dirx
