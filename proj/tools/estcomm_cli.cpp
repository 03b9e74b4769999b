// estcomm: run protocols, scaling sweeps and spectral diagnostics.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "estcomm/errors.hpp"
#include "estcomm/generic.hpp"
#include "estcomm/harness.hpp"
#include "estcomm/spectral.hpp"

using namespace estcomm;

namespace {

struct Options {
  std::string protocol = "sampling";
  std::string family;
  std::optional<int> n;
  std::optional<std::size_t> k;
  std::optional<std::size_t> m;
  std::string smooth;
  std::vector<double> sequence;
  std::uint64_t family_seed = 0;
  std::vector<double> epsilons;
  double delta = 0.1;
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  std::string out;
  std::string fit_out;
  std::string access = "full";
  std::string instance = "random_dense";
  std::vector<std::string> sets;
  bool fixed_instance = false;
  std::string target;
};

void add_family_flags(CLI::App* app, Options& o) {
  app->add_option("--family", o.family, "function family (eq, gt, ip, abs, smooth, toeplitz, hadamard, distance, "
                                        "double_index, random_boolean, identity)");
  app->add_option("--n", o.n, "bit length for eq/gt/ip/random_boolean");
  app->add_option("--k", o.k, "matrix size for identity/hadamard/distance, index bits for double_index");
  app->add_option("--m", o.m, "grid intervals for abs/smooth");
  app->add_option("--smooth", o.smooth, "smooth catalog entry (quad_sum, sin_sum, poly_separable, exp_prod)");
  app->add_option("--sequence", o.sequence, "toeplitz diagonal values a_{-(N-1)}..a_{N-1}")->delimiter(',');
  app->add_option("--family-seed", o.family_seed, "seed for random_boolean");
}

void add_run_flags(CLI::App* app, Options& o, bool sweep) {
  app->add_option("--protocol", o.protocol, "protocol id")->check(CLI::IsMember(protocol_ids()));
  add_family_flags(app, o);
  auto* eps = app->add_option("--epsilon", o.epsilons, sweep ? "target errors, decreasing (repeatable)"
                                                              : "target error")
                  ->delimiter(',');
  if (!sweep) eps->expected(1);
  app->add_option("--delta", o.delta, "failure probability");
  app->add_option("--trials", o.trials, "trials per epsilon");
  app->add_option("--seed", o.seed, "base seed");
  app->add_option("--out", o.out, "CSV output path");
  if (sweep) app->add_option("--fit-out", o.fit_out, "CSV path for the fitted points");
  app->add_option("--access", o.access, "input access")->check(CLI::IsMember({"full", "sample"}));
  app->add_option("--instance", o.instance,
                  "input generator (point_mass, uniform, random_sparse, random_dense, adversarial_atom)");
  app->add_option("--set", o.sets, "protocol constant name=value (repeatable)");
  app->add_flag("--fixed-instance", o.fixed_instance, "reuse one input pair for every trial");
}

std::string default_family(const std::string& protocol) {
  if (protocol == "eq" || protocol == "sparse") return "eq";
  if (protocol == "gt") return "gt";
  if (protocol == "abs" || protocol == "convex") return "abs";
  if (protocol == "smooth") return "smooth";
  if (protocol == "toeplitz") return "toeplitz";
  return "random_boolean";
}

FamilyParams family_params(const Options& o, Family fam) {
  FamilyParams fp;
  fp.n = o.n;
  fp.k = o.k;
  fp.m = o.m;
  if ((fam == Family::ABS_GRID || fam == Family::SMOOTH_GRID) && !fp.m) fp.m = 256;
  if ((fam == Family::EQ || fam == Family::GT || fam == Family::IP || fam == Family::RANDOM_BOOLEAN) && !fp.n &&
      !fp.k)
    fp.n = 8;
  fp.smooth_name = o.smooth;
  fp.sequence = o.sequence;
  fp.seed = o.family_seed;
  return fp;
}

ExperimentSpec make_spec(const Options& o) {
  ExperimentSpec s;
  s.protocol = o.protocol;
  s.family = o.family.empty() ? default_family(o.protocol) : o.family;
  s.params = family_params(o, parse_family(s.family));
  s.instance = parse_instance(o.instance);
  s.epsilons = o.epsilons.empty() ? std::vector<double>{0.1} : o.epsilons;
  s.trials = o.trials;
  s.seed = o.seed;
  s.delta = o.delta;
  s.access = o.access == "sample" ? AccessMode::SampleOnly : AccessMode::FullDistribution;
  s.fixed_instance = o.fixed_instance;
  for (const auto& kv : o.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("--set expects name=value, got '" + kv + "'");
    try {
      std::size_t used = 0;
      const double v = std::stod(kv.substr(eq + 1), &used);
      if (used != kv.size() - eq - 1) throw std::invalid_argument("trailing");
      s.constants[kv.substr(0, eq)] = v;
    } catch (const std::exception&) {
      throw ValidationError("--set value for '" + kv.substr(0, eq) + "' is not a number");
    }
  }
  return s;
}

void write_records(const std::vector<TrialRecord>& r, const Options& o) {
  if (!o.out.empty()) export_csv(r, o.out);
}

int cmd_run(const Options& o) {
  const auto spec = make_spec(o);
  const auto records = run_experiment(spec);
  write_records(records, o);
  const auto s = summarize_failures(records);
  std::printf("protocol=%s family=%s trials=%zu failures=%zu failure_rate=%.4f wilson99=%.4f median_bits=%.0f\n",
              spec.protocol.c_str(), spec.family.c_str(), s.trials, s.failures, s.rate, s.wilson, s.median_bits);
  if (spec.protocol == "debias") {
    // Var(z - truth) averages the per-instance variance of z.
    std::vector<double> d;
    for (const auto& r : records)
      if (r.z && r.epsilon == spec.epsilons.front()) d.push_back(*r.z - r.truth);
    if (d.size() >= 2) {
      double mean = 0.0;
      for (double v : d) mean += v;
      mean /= static_cast<double>(d.size());
      double var = 0.0;
      for (double v : d) var += (v - mean) * (v - mean);
      var /= static_cast<double>(d.size() - 1);
      ProtocolConfig cfg;
      cfg.epsilon = spec.epsilons.front();
      cfg.constants = spec.constants;
      const double k = static_cast<double>(debias_plan(cfg).k_outer);
      const double half = 2.5758 * var * std::sqrt(2.0 / static_cast<double>(d.size() - 1));
      std::printf("var_z=%.6g bound=%.6g ci_half=%.6g k=%.0f within=%s\n", var, 16.0 / (k * k), half, k,
                  var <= 16.0 / (k * k) + half ? "yes" : "no");
    }
  }
  return 0;
}

int cmd_sweep(const Options& o) {
  if (o.epsilons.size() < 3) throw ValidationError("sweep needs at least 3 epsilon values");
  const auto spec = make_spec(o);
  const auto records = run_experiment(spec);
  write_records(records, o);
  for (double e : spec.epsilons) {
    std::vector<TrialRecord> sub;
    for (const auto& r : records)
      if (r.epsilon == e) sub.push_back(r);
    const auto s = summarize_failures(sub);
    std::printf("epsilon=%.6g trials=%zu failures=%zu median_bits=%.0f\n", e, s.trials, s.failures, s.median_bits);
  }
  const auto fit = fit_scaling(records);
  if (!o.fit_out.empty()) export_csv(fit, o.fit_out);
  std::printf("slope=%.3f r2=%.3f\n", fit.slope, fit.r_squared);
  return 0;
}

int cmd_diag(const Options& o) {
  if (o.target == "distance-inverse") {
    const std::size_t k = o.k.value_or(16);
    const auto c = path_distance_inverse_check(k);
    std::printf("k=%zu residual=%.3g lambda_k=%.10g bound=%.10g within=%s\n", k, c.residual, c.lambda_k, c.bound,
                c.lambda_k <= c.bound + 1e-6 ? "yes" : "no");
    return 0;
  }
  const std::string fam_name = o.family.empty() ? "identity" : o.family;
  const Family fam = parse_family(fam_name);
  FamilyParams fp = family_params(o, fam);
  if (fam_name == "identity" && !fp.k && !o.n) fp.k = 16;
  const TargetFn f = build_family(fam, fp);
  if (o.target == "svd") {
    const auto s = svd_summary(f);
    std::printf("rank=%zu spectral_norm=%.10g frobenius=%.10g residual=%.3g\n", s.rank, s.spectral_norm,
                s.frobenius, s.reconstruction_residual);
    std::printf("t,sigma,lambda\n");
    for (std::size_t t = 0; t < s.rank; ++t) std::printf("%zu,%.12g,%.12g\n", t + 1, s.singular_values[t], s.lambda[t]);
    return 0;
  }
  if (o.target == "lambda") {
    const auto s = svd_summary(f);
    const auto c = lambda_bound_check(s, std::max(f.rows(), f.cols()));
    std::printf("t,lambda,floor,margin\n");
    for (std::size_t t = 0; t < s.rank; ++t)
      std::printf("%zu,%.12g,%.12g,%.12g\n", t + 1, s.lambda[t], s.lambda[t] - c.margins[t], c.margins[t]);
    if (c.violation) {
      std::printf("violation=%zu\n", *c.violation);
    } else {
      std::printf("violation=none\n");
    }
    return 0;
  }
  if (o.target == "discrepancy") {
    const auto d = brute_force_discrepancy(f);
    std::printf("value=%.17g rows=", d.value);
    for (std::size_t i = 0; i < d.witness_rows.size(); ++i) std::printf("%s%zu", i ? ";" : "", d.witness_rows[i]);
    std::printf(" cols=");
    for (std::size_t i = 0; i < d.witness_cols.size(); ++i) std::printf("%s%zu", i ? ";" : "", d.witness_cols[i]);
    std::printf("\n");
    return 0;
  }
  throw ValidationError("unknown diag target '" + o.target + "'");
}

// Appends key=value lines from --config as flags not already on the command line.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open config file '" + path + "'");
  auto given = [&](const std::string& flag) {
    for (const auto& a : args)
      if (a == flag || a.rfind(flag + "=", 0) == 0) return true;
    return false;
  };
  std::vector<std::string> extra;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    const auto trim = [](std::string v) {
      const auto a = v.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string{};
      return v.substr(a, v.find_last_not_of(" \t\r") - a + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected key=value");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    const std::string flag = "--" + key;
    if (key == "config" || given(flag)) continue;
    if (key == "fixed-instance" || key == "fixed_instance") {
      if (val == "true" || val == "1") extra.push_back("--fixed-instance");
      continue;
    }
    extra.push_back(flag);
    extra.push_back(val);
  }
  args.insert(args.end(), extra.begin(), extra.end());
  return args;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Two-party distributed estimation: protocols, sweeps and spectral diagnostics"};
  app.require_subcommand(1);
  Options o;
  auto* run = app.add_subcommand("run", "run a protocol over random trials and export CSV");
  add_run_flags(run, o, false);
  run->add_option("--config", "key=value file; flags override it");
  auto* sweep = app.add_subcommand("sweep", "run a protocol over several epsilons and fit the bit scaling");
  add_run_flags(sweep, o, true);
  sweep->add_option("--config", "key=value file; flags override it");
  auto* diag = app.add_subcommand("diag", "spectral and discrepancy diagnostics");
  diag->add_option("target", o.target, "svd, lambda, distance-inverse or discrepancy")
      ->required()
      ->check(CLI::IsMember({"svd", "lambda", "distance-inverse", "discrepancy"}));
  add_family_flags(diag, o);
  diag->add_option("--config", "key=value file; flags override it");

  std::vector<std::string> args;
  try {
    args = expand_config(argc, argv);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (run->parsed()) return cmd_run(o);
    if (sweep->parsed()) return cmd_sweep(o);
    return cmd_diag(o);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const ApproximationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}
