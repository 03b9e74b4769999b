#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "estcomm/prob_vec.hpp"
#include "estcomm/rng.hpp"

namespace estcomm {

class TargetFn;

enum class Party { Alice, Bob };

const char* party_name(Party p);

struct Message {
  Party speaker;
  std::uint64_t bits;
  std::string label;
};

/// Communication meter for a single protocol run.
class CostLedger {
 public:
  void send(Party speaker, std::uint64_t bits, std::string label);

  /// Append another run's messages sequentially (its rounds follow ours).
  void absorb(const CostLedger& other, std::string_view label_prefix = {});

  /// Merge independent runs that execute side by side: the i-th round of every
  /// run is sent in the same round of the result.
  static CostLedger parallel(const std::vector<CostLedger>& runs, std::string_view label_prefix = {});

  std::uint64_t bits_alice() const { return bits_alice_; }
  std::uint64_t bits_bob() const { return bits_bob_; }
  std::uint64_t total_bits() const { return bits_alice_ + bits_bob_; }
  /// Speaker alternations + 1; 0 for an empty transcript.
  std::uint64_t rounds() const;
  const std::vector<Message>& messages() const { return messages_; }

  /// Total bits of messages whose label starts with `prefix`.
  std::uint64_t bits_labeled(std::string_view prefix) const;

 private:
  std::uint64_t bits_alice_ = 0;
  std::uint64_t bits_bob_ = 0;
  std::vector<Message> messages_;
};

/// Bits to name one element of a size-n domain.
std::uint64_t index_bits(std::uint64_t n);

struct Quantized {
  std::int64_t code;
  std::uint64_t bits;
  double decoded;
};

/// Fixed-point code for v in [-1,1] with |decoded - v| <= eta/2.
Quantized quantize(double value, double eta);
double dequantize(std::int64_t code, double eta);

/// Same code over an arbitrary interval [lo, hi].
Quantized quantize_range(double value, double lo, double hi, double eta);

/// Rounds to the nearest float; costs 32 bits.
Quantized quantize_float32(double value);

enum class AccessMode { FullDistribution, SampleOnly };

struct ProtocolConfig {
  double epsilon = 0.1;
  double delta = 0.1;
  std::uint64_t seed = 1;
  AccessMode access = AccessMode::FullDistribution;
  std::map<std::string, double> constants;

  /// Throws ValidationError when epsilon or delta leave their open intervals.
  void validate() const;
  double constant(const std::string& name, double fallback) const;
  ProtocolConfig with_epsilon(double eps) const;
  ProtocolConfig with_seed(std::uint64_t s) const;
};

struct EstimateReport {
  double estimate = 0.0;
  std::optional<double> truth;
  std::optional<double> abs_error;
  CostLedger ledger;
  std::uint64_t seed = 0;

  void set_truth(double t);
};

/// E_{x~p, y~q} f(x, y), summed over the two supports.
double exact_expectation(const ProbVec& p, const ProbVec& q, const TargetFn& f);

/// Bilinear form a^T A b for finitely supported real vectors.
double exact_bilinear(const SignedVec& a, const SignedVec& b, const TargetFn& f);

/// Number of independent runs whose median fails with probability <= delta
/// when each run fails with probability <= base. Always odd.
std::size_t amplification_runs(double delta, double base);

/// Runs `once` with derived seeds until the requested delta is reached and
/// returns the median estimate; runs happen in parallel so rounds do not add up.
EstimateReport amplify(const ProtocolConfig& cfg, double base_delta,
                       const std::function<EstimateReport(const ProtocolConfig&)>& once);

}  // namespace estcomm
