#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "estcomm/core.hpp"
#include "estcomm/target_fn.hpp"

namespace estcomm {

/// Entries of p that are at least eps; everything lighter is dropped.
SignedVec heavy_truncate(const ProbVec& p, double eps);
SignedVec heavy_truncate(const SignedVec& p, double eps);

/// Shared-randomness hash of x into [0, m).
std::size_t hash_bucket(std::uint64_t key, std::size_t x, std::size_t m);

struct EqPlan {
  double eps_internal;  // eps / 6
  std::size_t buckets;  // m = ceil(40 / eps_internal^2)
  double beta;          // heavy threshold after hashing
  std::size_t samples;  // t
};

EqPlan eq_plan(const ProtocolConfig& cfg);

/// Estimates <p, q> = Pr[x == y].
EstimateReport eq_protocol(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg);

/// f with at most s nonzeros per row (s defaults to the observed maximum).
EstimateReport sparse_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                               std::optional<std::size_t> s = std::nullopt);

/// Intervals [endpoints[j], endpoints[j+1]) of the index domain.
struct PartitionSpec {
  std::vector<std::size_t> endpoints;  // m + 1 values, first 0, last N
  std::vector<double> masses;
  std::vector<double> cond_means;      // in index units; midpoint for empty intervals
  std::vector<std::size_t> heavy_atoms;  // domain points with mass > beta

  std::size_t size() const { return masses.size(); }
  std::size_t begin(std::size_t j) const { return endpoints[j]; }
  std::size_t end(std::size_t j) const { return endpoints[j + 1]; }
  /// Index of the interval containing x.
  std::size_t locate(std::size_t x) const;
};

/// Greedy left-to-right partition with masses <= beta. With `strong` each
/// interval also spans at most beta of the domain (as a fraction of N - 1).
PartitionSpec interval_partition(const ProbVec& p, double beta, bool strong);

/// Common refinement of two partitions' endpoints, with masses and
/// conditional means taken under p.
PartitionSpec refine(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const ProbVec& p);

/// Pr[x >= y] evaluated through the interval decomposition with exact
/// within-interval terms. Equal to Pr[x >= y] for any partition.
double gt_decomposition_value(const ProbVec& p, const ProbVec& q, const std::vector<std::size_t>& endpoints);
/// Same for E|x - y| on index units.
double abs_decomposition_value(const ProbVec& p, const ProbVec& q, const std::vector<std::size_t>& endpoints);

double exact_gt(const ProbVec& p, const ProbVec& q);
/// E|x - y| / (N - 1) for points i / (N - 1).
double exact_abs(const ProbVec& p, const ProbVec& q);

/// Pr[x >= y] over a common ordered domain.
EstimateReport gt_protocol(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg);

/// Piecewise-constant Toeplitz f as a combination of shifted GT instances.
EstimateReport toeplitz_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg);

/// E|x - y| for p, q on the grid {0, 1/m, ..., 1} with m = N - 1.
EstimateReport abs_protocol(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg);

/// f(x) = shift + E_{z~D} |x - z| on the grid {0, 1/m, ..., 1}.
struct ConvexMeasure {
  std::vector<double> cdf;  // F at each grid point, final value 1
  double shift = 0.0;

  std::size_t grid() const { return cdf.size() - 1; }
  /// Point masses of D on the grid.
  std::vector<double> masses() const;
  double mean() const;
  /// shift + E|x - z|.
  double evaluate(double x) const;
  /// Inverse-CDF draw of a grid index.
  std::size_t sample(Rng& rng) const;
};

/// Values f(i/m) for i = 0..m of a convex 1-Lipschitz function.
ConvexMeasure convex_to_measure(const std::vector<double>& values);

struct ConvexMixture {
  ProbVec D;
  double shift;  // E_{x~p} c_x
};

/// Alice's side of the convex reduction: mix the slice measures under p.
ConvexMixture convex_mixture(const ProbVec& p, const TargetFn& f);

/// f convex and 1-Lipschitz in y on an (m+1) x (m+1) grid.
EstimateReport convex_lipschitz_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f,
                                         const ProtocolConfig& cfg);

/// y-derivative of order i at (x, y); central differences when the
/// function has no analytic derivatives.
double smooth_derivative(const SmoothSpec& s, double x, double y, int order, double step);

struct SmoothTrace {
  double alpha = 0.0;
  std::size_t intervals = 0;
  double residual_bound = 0.0;  // max |f - f_hat| over the grid
  bool residual_skipped = false;
};

/// f a SMOOTH_GRID function whose y-derivatives up to `order` are bounded.
EstimateReport smooth_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                               int order, SmoothTrace* trace = nullptr);

}  // namespace estcomm
