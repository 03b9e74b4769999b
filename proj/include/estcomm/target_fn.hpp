#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace estcomm {

enum class Family {
  EQ,
  GT,
  IP,
  ABS_GRID,
  SMOOTH_GRID,
  TOEPLITZ,
  HADAMARD,
  DISTANCE,
  DOUBLE_INDEX,
  RANDOM_BOOLEAN,
  DENSE_CUSTOM,
};

const char* family_name(Family f);
/// Accepts lower-case names plus "identity" (EQ on k points).
Family parse_family(const std::string& name);

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Truncated SVD factors: A ~= U diag(sigma) V^T, columns limited to the
/// numerical rank (sigma_i >= 1e-10 sigma_1).
struct SvdFactors {
  Eigen::MatrixXd U;
  Eigen::VectorXd sigma;
  Eigen::MatrixXd V;
  std::size_t rank() const { return static_cast<std::size_t>(sigma.size()); }
};

/// f(x, y) and its y-derivatives for functions on [0,1]^2.
/// order 0 is the value.
using SmoothFn = std::function<double(double x, double y, int order)>;

struct SmoothSpec {
  std::string name;
  SmoothFn fn;
  /// Bound on |d^i/dy^i f| for every order i used; callers rely on it to size ranges.
  std::function<double(int order)> derivative_bound;
  bool analytic = true;
};

/// Parameters for build_family. Unused fields are ignored by a family.
struct FamilyParams {
  std::optional<int> n;                 // bit length for EQ/GT/IP/RANDOM_BOOLEAN
  std::optional<std::size_t> k;         // matrix size for HADAMARD/DISTANCE/identity, index bits for DOUBLE_INDEX
  std::optional<std::size_t> m;         // grid intervals for ABS_GRID/SMOOTH_GRID
  std::vector<double> sequence;         // TOEPLITZ diagonal values a_{-(N-1)}..a_{N-1}
  std::string smooth_name;              // SMOOTH_GRID catalog entry
  std::uint64_t seed = 0;               // RANDOM_BOOLEAN
};

/// Bounded payoff matrix with entries in [-1,1].
class TargetFn {
 public:
  static constexpr std::size_t kMaterializeEntries = std::size_t{1} << 22;
  static constexpr std::size_t kSvdCap = 2048;

  using Oracle = std::function<double(std::size_t, std::size_t)>;

  static TargetFn from_oracle(std::size_t rows, std::size_t cols, Oracle oracle, Family family,
                              std::string name);
  /// Throws ValidationError if any entry leaves [-1,1].
  static TargetFn from_dense(RowMajorMatrix values, Family family = Family::DENSE_CUSTOM,
                             std::string name = "custom");

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  Family family() const { return family_; }
  const std::string& name() const { return impl_->name; }

  double operator()(std::size_t x, std::size_t y) const {
    return impl_->dense ? (*impl_->dense)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y))
                        : impl_->oracle(x, y);
  }

  bool has_dense() const { return impl_->dense != nullptr; }
  /// Throws CapExceeded when the matrix was too large to materialize.
  const RowMajorMatrix& dense() const;

  /// Computed once on first use and shared by copies; thread safe.
  /// Throws CapExceeded above kSvdCap rows or columns.
  const SvdFactors& svd() const;
  bool svd_ready() const;

  /// Grid size m for ABS_GRID/SMOOTH_GRID (domain points are i/m).
  std::size_t grid() const { return impl_->grid; }
  const SmoothSpec* smooth() const { return impl_->smooth ? &*impl_->smooth : nullptr; }
  /// DOUBLE_INDEX index bit count.
  std::size_t di_bits() const { return impl_->di_bits; }

  /// Largest number of nonzero entries in any row.
  std::size_t max_row_nonzeros() const;

 private:
  struct Impl {
    std::string name;
    Oracle oracle;
    std::unique_ptr<RowMajorMatrix> dense;
    std::size_t grid = 0;
    std::optional<SmoothSpec> smooth;
    std::size_t di_bits = 0;
    std::once_flag svd_once;
    std::unique_ptr<SvdFactors> svd;
  };

  friend TargetFn build_family(Family family, const FamilyParams& params);
  friend TargetFn make_smooth_grid(SmoothSpec spec, std::size_t m);

  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  Family family_ = Family::DENSE_CUSTOM;
  std::shared_ptr<Impl> impl_;
};

TargetFn build_family(Family family, const FamilyParams& params);

/// Catalog of smooth test functions: "quad_sum" ((x+y)^2/8), "sin_sum"
/// (sin(x+y)/4), "poly_separable" ((1+x)/2 * y^2), "exp_prod" (exp(xy-1)).
SmoothSpec smooth_catalog(const std::string& name);

/// SMOOTH_GRID on the (m+1)x(m+1) grid {0,1/m,...,1}^2.
TargetFn make_smooth_grid(SmoothSpec spec, std::size_t m);

/// Convenience: dense TargetFn from a callable evaluated on an
/// (m+1)x(m+1) grid over [0,1]^2.
TargetFn make_grid_function(std::size_t m, const std::function<double(double, double)>& g,
                            std::string name);

}  // namespace estcomm
