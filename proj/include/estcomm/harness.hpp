#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "estcomm/core.hpp"
#include "estcomm/target_fn.hpp"

namespace estcomm {

enum class InstanceKind { PointMass, Uniform, RandomSparse, RandomDense, AdversarialAtom };

const char* instance_name(InstanceKind k);
InstanceKind parse_instance(const std::string& name);

struct ExperimentSpec {
  std::string protocol = "sampling";
  std::string family = "random_boolean";
  FamilyParams params;
  InstanceKind instance = InstanceKind::RandomDense;
  std::vector<double> epsilons{0.1};
  std::size_t trials = 1;
  std::uint64_t seed = 1;
  double delta = 0.1;
  AccessMode access = AccessMode::FullDistribution;
  std::map<std::string, double> constants;
  /// Reuse trial 0's inputs for every trial.
  bool fixed_instance = false;

  /// Throws ValidationError.
  void validate() const;
};

struct TrialRecord {
  std::string protocol;
  std::string family;
  std::size_t n = 0;  // domain size
  double epsilon = 0.0;
  std::size_t trial = 0;
  double estimate = 0.0;
  double truth = 0.0;
  double abs_error = 0.0;
  std::uint64_t bits_alice = 0;
  std::uint64_t bits_bob = 0;
  std::uint64_t rounds = 0;
  std::uint64_t seed = 0;
  /// Unbiased debiasing statistic; only for single-run debias trials. Not exported.
  std::optional<double> z;

  bool operator==(const TrialRecord& o) const;
};

/// Protocol ids accepted by run_experiment.
const std::vector<std::string>& protocol_ids();

/// Builds the function for a spec (family + params).
TargetFn build_spec_function(const ExperimentSpec& spec);

/// Inputs of one trial: deterministic in (spec.seed, trial).
std::pair<ProbVec, ProbVec> make_instance(const ExperimentSpec& spec, const TargetFn& f, std::size_t trial);

/// Records ordered by (epsilon index, trial). Worker count from
/// ESTCOMM_THREADS, else the hardware concurrency.
std::vector<TrialRecord> run_experiment(const ExperimentSpec& spec);

std::size_t worker_count();

struct ScalingFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  std::vector<std::pair<double, double>> points;  // (log 1/eps, log median bits)
};

/// OLS of log(median total bits) on log(1/eps). Needs >= 3 distinct eps.
ScalingFit fit_scaling(const std::vector<TrialRecord>& records);
ScalingFit fit_points(std::vector<std::pair<double, double>> points);

/// Upper end of the Wilson score interval for failures / n.
double wilson_upper(std::size_t failures, std::size_t n, double z = 2.5758);

struct FailureSummary {
  std::size_t trials = 0;
  std::size_t failures = 0;
  double rate = 0.0;
  double wilson = 0.0;
  double median_bits = 0.0;
};

/// Failure means abs_error > epsilon.
FailureSummary summarize_failures(const std::vector<TrialRecord>& records);

inline constexpr const char* kCsvHeader =
    "protocol,family,n,epsilon,trial,estimate,truth,abs_error,bits_alice,bits_bob,rounds,seed";

void write_csv(const std::vector<TrialRecord>& records, std::ostream& out);
void export_csv(const std::vector<TrialRecord>& records, const std::string& path);
void export_csv(const ScalingFit& fit, const std::string& path);
std::vector<TrialRecord> read_csv(std::istream& in);
std::vector<TrialRecord> read_csv(const std::string& path);

}  // namespace estcomm
