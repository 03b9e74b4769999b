#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "estcomm/rng.hpp"

namespace estcomm {

/// One nonzero coordinate of a finite vector.
struct Entry {
  std::size_t index;
  double value;
};

/// Finite probability distribution over {0, ..., N-1}.
///
/// The support is always stored sorted; a dense copy is kept as well once the
/// support covers at least 10% of the domain. Sampling uses a Walker alias
/// table built at construction, so draws are O(1).
class ProbVec {
 public:
  static constexpr double kMassTolerance = 1e-12;
  static constexpr double kDenseThreshold = 0.10;

  static ProbVec from_dense(std::vector<double> mass);
  static ProbVec from_sparse(std::size_t domain_size, std::vector<Entry> entries);
  static ProbVec point_mass(std::size_t domain_size, std::size_t x);
  static ProbVec uniform(std::size_t domain_size);
  /// Uniform over the first `k` elements of a size-N domain.
  static ProbVec uniform_prefix(std::size_t domain_size, std::size_t k);
  /// Mixture alpha*a + (1-alpha)*b.
  static ProbVec mixture(const ProbVec& a, const ProbVec& b, double alpha);

  std::size_t domain_size() const { return domain_size_; }
  std::span<const Entry> support() const { return support_; }
  std::size_t support_size() const { return support_.size(); }
  bool is_dense() const { return !dense_.empty(); }

  /// Mass of x; zero outside the support.
  double operator[](std::size_t x) const;
  std::vector<double> to_dense() const;

  std::size_t sample(Rng& rng) const;

 private:
  ProbVec() = default;
  void build(std::size_t domain_size, std::vector<Entry> entries);

  std::size_t domain_size_ = 0;
  std::vector<Entry> support_;
  std::vector<double> dense_;
  std::vector<double> alias_prob_;
  std::vector<std::uint32_t> alias_;
};

/// Draw one index from p.
inline std::size_t sample(const ProbVec& p, Rng& rng) { return p.sample(rng); }

/// Real vector with finitely many nonzero entries; used for signed inputs and
/// for truncated (sub-probability) vectors.
class SignedVec {
 public:
  SignedVec() = default;
  SignedVec(std::size_t domain_size, std::vector<Entry> entries);
  static SignedVec from_dense(std::span<const double> values);
  static SignedVec from_prob(const ProbVec& p);

  std::size_t domain_size() const { return domain_size_; }
  std::span<const Entry> entries() const { return entries_; }
  double operator[](std::size_t x) const;

  double l1() const;
  /// Nonnegative vectors with *this = positive_part() - negative_part().
  SignedVec positive_part() const;
  SignedVec negative_part() const;
  SignedVec negated() const;
  /// Inner product over the common domain.
  double dot(const SignedVec& other) const;
  /// Normalize a nonnegative vector with positive mass into a distribution.
  ProbVec normalized() const;

 private:
  std::size_t domain_size_ = 0;
  std::vector<Entry> entries_;
};

}  // namespace estcomm
