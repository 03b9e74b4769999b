#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "estcomm/prob_vec.hpp"
#include "estcomm/target_fn.hpp"

namespace estcomm {

struct SpectralSummary {
  std::vector<double> singular_values;  // nonincreasing, numerical rank only
  std::size_t rank = 0;
  double spectral_norm = 0.0;
  std::vector<double> lambda;  // lambda[t-1] = sum_{i<=t} 1/sigma_i
  double frobenius = 0.0;
  double reconstruction_residual = 0.0;  // max |A - U S V^T|
};

/// Throws CapExceeded above TargetFn::kSvdCap.
SpectralSummary svd_summary(const TargetFn& f);
SpectralSummary svd_summary(const RowMajorMatrix& a);

struct LambdaCheck {
  std::vector<double> margins;  // lambda_t - t^{3/2}/k
  std::optional<std::size_t> violation;  // first t (1-based) below the floor
};

/// Floor lambda_t >= t^{3/2}/k for k x k matrices bounded by 1.
LambdaCheck lambda_bound_check(const SpectralSummary& s, std::size_t k);

/// k x k matrix |i - j| / k.
RowMajorMatrix path_distance_matrix(std::size_t k);

struct PathInverseCheck {
  double residual;  // max |E E^{-1} - I| with the closed-form inverse
  double lambda_k;  // lambda_k(D_k)
  double bound;     // sqrt(3/2) k^2
};

PathInverseCheck path_distance_inverse_check(std::size_t k);

struct DiscrepancyReport {
  double value = 0.0;
  std::vector<std::size_t> witness_rows;
  std::vector<std::size_t> witness_cols;
  std::vector<double> theta_x;
  std::vector<double> theta_y;
};

inline constexpr std::size_t kDiscrepancyRowCap = 24;

/// max over rectangles R of |E_{theta_x x theta_y}[f 1_R]| by enumerating row
/// subsets; the best column set for a row set is read off the column sums.
DiscrepancyReport brute_force_discrepancy(const TargetFn& f, const ProbVec& theta_x, const ProbVec& theta_y);
/// Uniform theta on both sides.
DiscrepancyReport brute_force_discrepancy(const TargetFn& f);

/// |E[f 1_{S x T}]| for the given rectangle.
double rectangle_bias(const TargetFn& f, const std::vector<double>& theta_x, const std::vector<double>& theta_y,
                      const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols);

}  // namespace estcomm
