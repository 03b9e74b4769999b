#include "estcomm/target_fn.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <map>

#include "estcomm/errors.hpp"
#include "estcomm/rng.hpp"

namespace estcomm {

namespace {

const std::map<std::string, Family>& family_table() {
  static const std::map<std::string, Family> table = {
      {"eq", Family::EQ},
      {"identity", Family::EQ},
      {"gt", Family::GT},
      {"ip", Family::IP},
      {"abs", Family::ABS_GRID},
      {"abs_grid", Family::ABS_GRID},
      {"smooth", Family::SMOOTH_GRID},
      {"smooth_grid", Family::SMOOTH_GRID},
      {"toeplitz", Family::TOEPLITZ},
      {"hadamard", Family::HADAMARD},
      {"distance", Family::DISTANCE},
      {"double_index", Family::DOUBLE_INDEX},
      {"di", Family::DOUBLE_INDEX},
      {"random_boolean", Family::RANDOM_BOOLEAN},
      {"dense_custom", Family::DENSE_CUSTOM},
  };
  return table;
}

std::size_t bit_domain(const FamilyParams& params, const char* family, int max_bits = 24) {
  if (!params.n) throw ValidationError(std::string(family) + " needs n");
  if (*params.n < 1 || *params.n > max_bits) {
    throw ValidationError(std::string(family) + ": n must be in [1," + std::to_string(max_bits) + "]");
  }
  return std::size_t{1} << *params.n;
}

std::size_t need_k(const FamilyParams& params, const char* family) {
  if (!params.k || *params.k == 0) throw ValidationError(std::string(family) + " needs k >= 1");
  return *params.k;
}

}  // namespace

const char* family_name(Family f) {
  switch (f) {
    case Family::EQ: return "eq";
    case Family::GT: return "gt";
    case Family::IP: return "ip";
    case Family::ABS_GRID: return "abs";
    case Family::SMOOTH_GRID: return "smooth";
    case Family::TOEPLITZ: return "toeplitz";
    case Family::HADAMARD: return "hadamard";
    case Family::DISTANCE: return "distance";
    case Family::DOUBLE_INDEX: return "double_index";
    case Family::RANDOM_BOOLEAN: return "random_boolean";
    case Family::DENSE_CUSTOM: return "dense_custom";
  }
  return "unknown";
}

Family parse_family(const std::string& name) {
  auto it = family_table().find(name);
  if (it == family_table().end()) throw ValidationError("unknown function family '" + name + "'");
  return it->second;
}

TargetFn TargetFn::from_oracle(std::size_t rows, std::size_t cols, Oracle oracle, Family family,
                               std::string name) {
  if (rows == 0 || cols == 0) throw ValidationError("function with an empty domain");
  TargetFn f;
  f.rows_ = rows;
  f.cols_ = cols;
  f.family_ = family;
  f.impl_ = std::make_shared<Impl>();
  f.impl_->name = std::move(name);
  if (rows * cols <= kMaterializeEntries) {
    auto m = std::make_unique<RowMajorMatrix>(rows, cols);
    for (std::size_t x = 0; x < rows; ++x) {
      for (std::size_t y = 0; y < cols; ++y) {
        const double v = oracle(x, y);
        if (!(std::abs(v) <= 1.0 + 1e-12)) {
          throw ValidationError("entry (" + std::to_string(x) + "," + std::to_string(y) + ") = " +
                                std::to_string(v) + " outside [-1,1]");
        }
        (*m)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = v;
      }
    }
    f.impl_->dense = std::move(m);
  }
  f.impl_->oracle = std::move(oracle);
  return f;
}

TargetFn TargetFn::from_dense(RowMajorMatrix values, Family family, std::string name) {
  if (values.rows() == 0 || values.cols() == 0) throw ValidationError("function with an empty domain");
  if (!values.allFinite() || values.cwiseAbs().maxCoeff() > 1.0 + 1e-12) {
    throw ValidationError("dense function entries must lie in [-1,1]");
  }
  TargetFn f;
  f.rows_ = static_cast<std::size_t>(values.rows());
  f.cols_ = static_cast<std::size_t>(values.cols());
  f.family_ = family;
  f.impl_ = std::make_shared<Impl>();
  f.impl_->name = std::move(name);
  f.impl_->dense = std::make_unique<RowMajorMatrix>(std::move(values));
  const RowMajorMatrix* d = f.impl_->dense.get();
  f.impl_->oracle = [d](std::size_t x, std::size_t y) {
    return (*d)(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y));
  };
  return f;
}

const RowMajorMatrix& TargetFn::dense() const {
  if (!impl_->dense) {
    throw CapExceeded("function " + impl_->name + " is too large to hold densely (" + std::to_string(rows_) +
                      "x" + std::to_string(cols_) + ")");
  }
  return *impl_->dense;
}

const SvdFactors& TargetFn::svd() const {
  if (rows_ > kSvdCap || cols_ > kSvdCap) {
    throw CapExceeded("SVD size cap " + std::to_string(kSvdCap) + " exceeded by " + std::to_string(rows_) +
                      "x" + std::to_string(cols_) + " matrix");
  }
  std::call_once(impl_->svd_once, [this] {
    const Eigen::MatrixXd a = dense();
    Eigen::BDCSVD<Eigen::MatrixXd> solver(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd& s = solver.singularValues();
    Eigen::Index r = 0;
    if (s.size() > 0 && s(0) > 0.0) {
      while (r < s.size() && s(r) >= 1e-10 * s(0)) ++r;
    }
    auto out = std::make_unique<SvdFactors>();
    out->U = solver.matrixU().leftCols(r);
    out->sigma = s.head(r);
    out->V = solver.matrixV().leftCols(r);
    impl_->svd = std::move(out);
  });
  return *impl_->svd;
}

bool TargetFn::svd_ready() const { return impl_->svd != nullptr; }

std::size_t TargetFn::max_row_nonzeros() const {
  std::size_t best = 0;
  for (std::size_t x = 0; x < rows_; ++x) {
    std::size_t c = 0;
    for (std::size_t y = 0; y < cols_; ++y) c += (*this)(x, y) != 0.0;
    best = std::max(best, c);
  }
  return best;
}

SmoothSpec smooth_catalog(const std::string& name) {
  SmoothSpec s;
  s.name = name;
  if (name == "quad_sum") {
    s.fn = [](double x, double y, int order) {
      switch (order) {
        case 0: return (x + y) * (x + y) / 8.0;
        case 1: return (x + y) / 4.0;
        case 2: return 0.25;
        default: return 0.0;
      }
    };
    s.derivative_bound = [](int order) { return order <= 1 ? 0.5 : (order == 2 ? 0.25 : 0.0); };
  } else if (name == "sin_sum") {
    s.fn = [](double x, double y, int order) {
      // d^i/dy^i sin(t) = sin(t + i*pi/2)
      return std::sin(x + y + order * M_PI / 2.0) / 4.0;
    };
    s.derivative_bound = [](int) { return 0.25; };
  } else if (name == "poly_separable") {
    s.fn = [](double x, double y, int order) {
      const double u = (1.0 + x) / 2.0;
      switch (order) {
        case 0: return u * y * y;
        case 1: return 2.0 * u * y;
        case 2: return 2.0 * u;
        default: return 0.0;
      }
    };
    s.derivative_bound = [](int order) { return order == 0 ? 1.0 : (order <= 2 ? 2.0 : 0.0); };
  } else if (name == "exp_prod") {
    s.fn = [](double x, double y, int order) { return std::pow(x, order) * std::exp(x * y - 1.0); };
    s.derivative_bound = [](int) { return 1.0; };
  } else {
    throw ValidationError("unknown smooth function '" + name + "'");
  }
  return s;
}

TargetFn make_smooth_grid(SmoothSpec spec, std::size_t m) {
  if (m == 0) throw ValidationError("smooth grid needs m >= 1");
  if (!spec.fn) throw ValidationError("smooth function without an evaluator");
  const double step = 1.0 / static_cast<double>(m);
  SmoothFn fn = spec.fn;
  TargetFn f = TargetFn::from_oracle(
      m + 1, m + 1, [fn, step](std::size_t x, std::size_t y) { return fn(x * step, y * step, 0); },
      Family::SMOOTH_GRID, "smooth:" + spec.name);
  f.impl_->grid = m;
  f.impl_->smooth = std::move(spec);
  return f;
}

TargetFn make_grid_function(std::size_t m, const std::function<double(double, double)>& g, std::string name) {
  if (m == 0) throw ValidationError("grid function needs m >= 1");
  RowMajorMatrix a(m + 1, m + 1);
  for (std::size_t i = 0; i <= m; ++i) {
    for (std::size_t j = 0; j <= m; ++j) {
      a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          g(static_cast<double>(i) / m, static_cast<double>(j) / m);
    }
  }
  return TargetFn::from_dense(std::move(a), Family::DENSE_CUSTOM, std::move(name));
}

TargetFn build_family(Family family, const FamilyParams& params) {
  switch (family) {
    case Family::EQ: {
      const std::size_t n = params.n ? bit_domain(params, "eq") : need_k(params, "eq");
      return TargetFn::from_oracle(
          n, n, [](std::size_t x, std::size_t y) { return x == y ? 1.0 : 0.0; }, family, "eq");
    }
    case Family::GT: {
      const std::size_t n = params.n ? bit_domain(params, "gt") : need_k(params, "gt");
      return TargetFn::from_oracle(
          n, n, [](std::size_t x, std::size_t y) { return x >= y ? 1.0 : 0.0; }, family, "gt");
    }
    case Family::IP:
    case Family::HADAMARD: {
      std::size_t n = 0;
      if (family == Family::IP) {
        n = bit_domain(params, "ip");
      } else {
        n = need_k(params, "hadamard");
        if (!std::has_single_bit(n)) throw ValidationError("hadamard size must be a power of two");
      }
      return TargetFn::from_oracle(
          n, n, [](std::size_t x, std::size_t y) { return (std::popcount(x & y) & 1) ? -1.0 : 1.0; }, family,
          family_name(family));
    }
    case Family::ABS_GRID: {
      if (!params.m || *params.m == 0) throw ValidationError("abs grid needs m >= 1");
      const std::size_t m = *params.m;
      const double md = static_cast<double>(m);
      TargetFn f = TargetFn::from_oracle(
          m + 1, m + 1,
          [md](std::size_t x, std::size_t y) { return std::abs(static_cast<double>(x) / md - static_cast<double>(y) / md); },
          family, "abs");
      f.impl_->grid = m;
      return f;
    }
    case Family::SMOOTH_GRID: {
      if (!params.m || *params.m == 0) throw ValidationError("smooth grid needs m >= 1");
      return make_smooth_grid(smooth_catalog(params.smooth_name.empty() ? "quad_sum" : params.smooth_name),
                              *params.m);
    }
    case Family::TOEPLITZ: {
      const auto& a = params.sequence;
      if (a.empty() || a.size() % 2 == 0) throw ValidationError("toeplitz sequence must have odd length 2N-1");
      for (double v : a) {
        if (!(std::abs(v) <= 1.0)) throw ValidationError("toeplitz values must lie in [-1,1]");
      }
      const std::size_t n = (a.size() + 1) / 2;
      return TargetFn::from_oracle(
          n, n, [a, n](std::size_t x, std::size_t y) { return a[x + (n - 1) - y]; }, family, "toeplitz");
    }
    case Family::DISTANCE: {
      const std::size_t k = need_k(params, "distance");
      const double kd = static_cast<double>(k);
      return TargetFn::from_oracle(
          k, k,
          [kd](std::size_t i, std::size_t j) { return std::abs(static_cast<double>(i) - static_cast<double>(j)) / kd; },
          family, "distance");
    }
    case Family::DOUBLE_INDEX: {
      const std::size_t k = need_k(params, "double_index");
      if (k > 4) throw ValidationError("double_index supports k <= 4");
      const std::size_t payload = std::size_t{1} << k;  // bits per vector
      const std::size_t n = (std::size_t{1} << k) << payload;
      TargetFn f = TargetFn::from_oracle(
          n, n,
          [payload](std::size_t a, std::size_t b) {
            const std::size_t i = a >> payload, xbits = a & ((std::size_t{1} << payload) - 1);
            const std::size_t j = b >> payload, ybits = b & ((std::size_t{1} << payload) - 1);
            const double xj = ((xbits >> j) & 1) ? -1.0 : 1.0;
            const double yi = ((ybits >> i) & 1) ? -1.0 : 1.0;
            return xj * yi;
          },
          family, "double_index");
      f.impl_->di_bits = k;
      return f;
    }
    case Family::RANDOM_BOOLEAN: {
      const std::size_t n = bit_domain(params, "random_boolean", 12);
      const std::uint64_t key = Rng::mix(params.seed ^ 0xb5297a4d3f84d5b5ULL);
      return TargetFn::from_oracle(
          n, n,
          [key, n](std::size_t x, std::size_t y) {
            return (Rng::mix(key + static_cast<std::uint64_t>(x * n + y) * 0x9e3779b97f4a7c15ULL) >> 63) ? 1.0 : -1.0;
          },
          family, "random_boolean");
    }
    case Family::DENSE_CUSTOM:
      throw ValidationError("dense_custom functions are built with TargetFn::from_dense");
  }
  throw ValidationError("unknown family");
}

}  // namespace estcomm
