#include "dirx/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <optional>
#include <sstream>

#include <CLI11.hpp>

#include "dirx/dirichlet.hpp"
#include "dirx/format.hpp"
#include "dirx/harness.hpp"

namespace dirx {

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::uint64_t default_seed() {
  if (const char* env = std::getenv("DIRX_SEED")) {
    std::uint64_t seed = 0;
    if (parse_number(std::string_view(env), seed)) return seed;
  }
  return 0;
}

Eigen::VectorXi parse_int_vector(const std::string& text, const std::string& flag) {
  std::vector<int> values;
  for (auto field : split(text, ',')) {
    int v = 0;
    if (!parse_number(field, v)) throw UsageError("malformed " + flag + " vector '" + text + "'");
    values.push_back(v);
  }
  return Eigen::Map<Eigen::VectorXi>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::VectorXd parse_real_vector(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  for (auto field : split(text, ',')) {
    double v = 0.0;
    if (!parse_number(field, v)) throw UsageError("malformed " + flag + " vector '" + text + "'");
    values.push_back(v);
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

WeightedSumSpec parse_spec(const std::string& alpha, const std::string& f,
                           std::optional<double> upper) {
  Eigen::VectorXi a = parse_int_vector(alpha, "--alpha");
  Eigen::VectorXd v = parse_real_vector(f, "--f");
  try {
    if (upper) return WeightedSumSpec::with_upper(std::move(a), std::move(v), *upper);
    return WeightedSumSpec::make(std::move(a), std::move(v));
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }
}

void emit(const std::string& text, const std::string& output, std::ostream& out) {
  if (output.empty()) {
    out << text;
    return;
  }
  std::ofstream file(output, std::ios::binary);
  if (!file) throw std::runtime_error("cannot open output '" + output + "'");
  file << text;
}

struct RunOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> episodes;
  std::optional<int> workers;
  std::string output;
};

struct VerifyOptions {
  std::string alpha, f, output;
  double mu = 0.0;
  std::int64_t samples = 1000000;
  std::uint64_t seed = 0;
  int workers = 1;
};

struct KinfOptions {
  std::string alpha, p, f;
  double mu = 0.0;
  std::optional<double> upper;
  std::string output;
};

struct QuantileOptions {
  std::string alpha, f, output;
  double kappa = 0.85;
  int samples = 64;
  std::uint64_t seed = 0;
};

struct BernsteinOptions {
  std::string alpha, f, output;
  std::vector<double> deltas{0.1};
  int random = 0;
  int max_support = 4;
  int max_alpha = 20;
  std::int64_t samples = 100000;
  std::uint64_t seed = 0;
  int workers = 1;
};

int cmd_run(const RunOptions& o, std::ostream& out, std::ostream& err) {
  ExperimentConfig config;
  try {
    config = load_config(o.config);
    if (o.seed) config.master_seed = *o.seed;
    if (o.episodes) config.episodes = *o.episodes;
    if (o.workers) config.workers = *o.workers;
    if (!o.output.empty()) config.output = o.output;
    config.validate();
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  if (config.output.empty()) {
    err << "error: no output path (set 'output' in [experiment] or pass --output)\n";
    return kExitUsage;
  }
  const RunResult result = run_experiment(config);
  write_results(result, config, config.output);
  out << "agent;seed;final_cumulative;optimism_frequency;status\n";
  for (const auto& cell : result.cells) {
    out << cell.agent << ';' << cell.seed << ';' << format_double(cell.regret.total()) << ';'
        << (config.optimism_audit ? format_double(cell.optimism_frequency()) : "NA") << ';'
        << (cell.failure ? "failed" : "ok") << '\n';
    if (cell.failure) err << "cell " << cell.agent << '/' << cell.seed << ": " << *cell.failure << '\n';
  }
  return result.ok() ? kExitOk : kExitFailure;
}

int cmd_verify_bounds(const VerifyOptions& o, std::ostream& out) {
  const WeightedSumSpec spec = parse_spec(o.alpha, o.f, std::nullopt);
  if (o.samples < 10000) throw UsageError("--samples must be at least 10000");
  if (!(o.mu >= 0.0 && o.mu < spec.upper)) throw UsageError("--mu must lie in [0, max f)");
  Stream stream(o.seed);
  const BoundCertificate cert = certify_bounds(spec, o.mu, o.samples, stream, o.workers);
  emit(certificate_csv_header() + '\n' + to_csv_row(cert) + '\n', o.output, out);
  switch (cert.verdict) {
    case Verdict::pass: return kExitOk;
    case Verdict::violation: return kExitFailure;
    case Verdict::inconclusive: return kExitInconclusive;
  }
  return kExitInconclusive;
}

int cmd_kinf(const KinfOptions& o, std::ostream& out) {
  if (o.alpha.empty() == o.p.empty()) throw UsageError("pass exactly one of --alpha or --p");
  const Eigen::VectorXd f = parse_real_vector(o.f, "--f");
  Eigen::VectorXd p;
  std::string label;
  if (!o.alpha.empty()) {
    const WeightedSumSpec spec = parse_spec(o.alpha, o.f, o.upper);
    p = spec.mean_weights();
    label = join(spec.alpha);
  } else {
    p = parse_real_vector(o.p, "--p");
    if ((p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > 1e-9) {
      throw UsageError("--p must be a probability vector");
    }
    label = join(p);
  }
  if (p.size() != f.size()) throw UsageError("--f length differs from the weights");
  const double upper = o.upper.value_or(f.maxCoeff());
  if (!(o.mu >= 0.0 && o.mu < upper)) {
    throw UsageError("--mu must lie in [0, upper): transportation target unattainable");
  }
  const KinfResult r = kinf(p, f, upper, o.mu);
  std::ostringstream text;
  text << "weights;f;mu;kinf;lambda_star;iterations;converged\n"
       << label << ';' << join(f) << ';' << format_double(o.mu) << ';' << format_double(r.value)
       << ';' << format_double(r.lambda_star) << ';' << r.iterations << ';'
       << (r.converged ? "true" : "false") << '\n';
  emit(text.str(), o.output, out);
  return kExitOk;
}

int cmd_quantile(const QuantileOptions& o, std::ostream& out) {
  const WeightedSumSpec spec = parse_spec(o.alpha, o.f, std::nullopt);
  if (!(o.kappa > 0.0 && o.kappa < 1.0)) throw UsageError("--kappa must lie in (0, 1)");
  if (o.samples < 1) throw UsageError("--samples must be positive");
  Stream stream(o.seed);
  const double q = exact_quantile_mc(spec, o.kappa, o.samples, stream);
  std::ostringstream text;
  text << "alpha;f;kappa;samples;quantile\n"
       << join(spec.alpha) << ';' << join(spec.values) << ';' << format_double(o.kappa) << ';'
       << o.samples << ';' << format_double(q) << '\n';
  emit(text.str(), o.output, out);
  return kExitOk;
}

int cmd_bernstein(const BernsteinOptions& o, std::ostream& out) {
  std::vector<WeightedSumSpec> specs;
  if (o.random > 0) {
    if (!o.alpha.empty()) throw UsageError("--random and --alpha are exclusive");
    Stream spec_stream = derive_stream(o.seed, {hash_name("bernstein-specs")});
    for (int i = 0; i < o.random; ++i) {
      specs.push_back(random_spec(spec_stream, o.max_support, o.max_alpha, true));
    }
  } else {
    if (o.alpha.empty() || o.f.empty()) throw UsageError("pass --alpha and --f, or --random N");
    WeightedSumSpec spec = parse_spec(o.alpha, o.f, std::nullopt);
    if (spec.values(0) != spec.upper) throw UsageError("f(0) must be the largest value");
    specs.push_back(std::move(spec));
  }
  for (double d : o.deltas) {
    if (!(d > 0.0 && d < 1.0)) throw UsageError("--delta values must lie in (0, 1)");
  }
  Stream stream(o.seed);
  std::string text = certificate_csv_header() + '\n';
  bool all_pass = true;
  for (const auto& spec : specs) {
    for (double d : o.deltas) {
      const BernsteinReport report = bernstein_tail_check(spec, d, o.samples, stream, o.workers);
      all_pass &= report.passed;
      text += to_csv_row(report) + '\n';
    }
  }
  emit(text, o.output, out);
  return all_pass ? kExitOk : kExitFailure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Dirichlet-quantile optimistic exploration and bound verification"};
  app.require_subcommand(1, 1);
  const std::uint64_t seed_default = default_seed();

  RunOptions run;
  auto* run_cmd = app.add_subcommand("run", "Run a regret experiment from a config file");
  run_cmd->add_option("--config", run.config, "Experiment config file")->required();
  run_cmd->add_option("--seed", run.seed, "Override the master seed");
  run_cmd->add_option("--episodes", run.episodes, "Override the episode count");
  run_cmd->add_option("--workers", run.workers, "Parallel (agent, seed) cells");
  run_cmd->add_option("--output", run.output, "Regret CSV path (manifest is written beside it)");

  VerifyOptions verify;
  verify.seed = seed_default;
  auto* verify_cmd =
      app.add_subcommand("verify-bounds", "Monte-Carlo check of the boundary-crossing bounds");
  verify_cmd->add_option("--alpha", verify.alpha, "Integer Dirichlet parameter, e.g. 2,2")->required();
  verify_cmd->add_option("--f", verify.f, "Value vector, e.g. 1,0")->required();
  verify_cmd->add_option("--mu", verify.mu, "Threshold")->required();
  verify_cmd->add_option("--samples", verify.samples, "Monte-Carlo draws")->capture_default_str();
  verify_cmd->add_option("--seed", verify.seed, "Random seed")->capture_default_str();
  verify_cmd->add_option("--workers", verify.workers, "Sampling threads")->capture_default_str();
  verify_cmd->add_option("--output", verify.output, "Write the CSV here instead of stdout");

  KinfOptions kinf_opts;
  auto* kinf_cmd = app.add_subcommand("kinf", "Minimal KL divergence under a mean constraint");
  kinf_cmd->add_option("--alpha", kinf_opts.alpha, "Integer counts defining p = alpha / sum");
  kinf_cmd->add_option("--p", kinf_opts.p, "Probability vector");
  kinf_cmd->add_option("--f", kinf_opts.f, "Value vector")->required();
  kinf_cmd->add_option("--mu", kinf_opts.mu, "Target mean")->required();
  kinf_cmd->add_option("--upper", kinf_opts.upper, "Upper value b (default max f)");
  kinf_cmd->add_option("--output", kinf_opts.output, "Write the CSV here instead of stdout");

  QuantileOptions quant;
  quant.seed = seed_default;
  auto* quant_cmd = app.add_subcommand("quantile", "Monte-Carlo quantile of a Dirichlet weighted sum");
  quant_cmd->add_option("--alpha", quant.alpha, "Integer Dirichlet parameter")->required();
  quant_cmd->add_option("--f", quant.f, "Value vector")->required();
  quant_cmd->add_option("--kappa", quant.kappa, "Quantile order in (0, 1)")->capture_default_str();
  quant_cmd->add_option("--samples,-B", quant.samples, "Monte-Carlo draws")->capture_default_str();
  quant_cmd->add_option("--seed", quant.seed, "Random seed")->capture_default_str();
  quant_cmd->add_option("--output", quant.output, "Write the CSV here instead of stdout");

  BernsteinOptions bern;
  bern.seed = seed_default;
  auto* bern_cmd =
      app.add_subcommand("bernstein-check", "Monte-Carlo check of the Bernstein-type tail bound");
  bern_cmd->add_option("--alpha", bern.alpha, "Integer Dirichlet parameter");
  bern_cmd->add_option("--f", bern.f, "Value vector with f(0) maximal");
  bern_cmd->add_option("--delta", bern.deltas, "Confidence level(s)")->delimiter(',')->capture_default_str();
  bern_cmd->add_option("--random", bern.random, "Check N random specs instead of --alpha/--f");
  bern_cmd->add_option("--max-support", bern.max_support, "Random specs: max coordinates")->capture_default_str();
  bern_cmd->add_option("--max-alpha", bern.max_alpha, "Random specs: max alpha entry")->capture_default_str();
  bern_cmd->add_option("--samples", bern.samples, "Monte-Carlo draws per check")->capture_default_str();
  bern_cmd->add_option("--seed", bern.seed, "Random seed")->capture_default_str();
  bern_cmd->add_option("--workers", bern.workers, "Sampling threads")->capture_default_str();
  bern_cmd->add_option("--output", bern.output, "Write the CSV here instead of stdout");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*run_cmd) return cmd_run(run, out, err);
    if (*verify_cmd) return cmd_verify_bounds(verify, out);
    if (*kinf_cmd) return cmd_kinf(kinf_opts, out);
    if (*quant_cmd) return cmd_quantile(quant, out);
    if (*bern_cmd) return cmd_bernstein(bern, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

}  // namespace dirx
