#include "estcomm/spectral.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <string>

#include "estcomm/errors.hpp"

namespace estcomm {

namespace {

SpectralSummary summarize(const RowMajorMatrix& a, const Eigen::MatrixXd& U, const Eigen::VectorXd& sigma,
                          const Eigen::MatrixXd& V) {
  SpectralSummary s;
  s.rank = static_cast<std::size_t>(sigma.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    s.singular_values.push_back(sigma(i));
    acc += 1.0 / sigma(i);
    s.lambda.push_back(acc);
  }
  s.spectral_norm = s.rank ? sigma(0) : 0.0;
  s.frobenius = a.norm();
  const Eigen::MatrixXd rec = U * sigma.asDiagonal() * V.transpose();
  s.reconstruction_residual = (a - rec).cwiseAbs().maxCoeff();
  return s;
}

}  // namespace

SpectralSummary svd_summary(const TargetFn& f) {
  const auto& d = f.svd();
  return summarize(f.dense(), d.U, d.sigma, d.V);
}

SpectralSummary svd_summary(const RowMajorMatrix& a) {
  if (static_cast<std::size_t>(std::max(a.rows(), a.cols())) > TargetFn::kSvdCap) {
    throw CapExceeded("matrix too large for a dense SVD");
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Eigen::VectorXd& sv = svd.singularValues();
  Eigen::Index r = 0;
  while (r < sv.size() && sv(r) > 1e-10 * sv(0)) ++r;
  return summarize(a, svd.matrixU().leftCols(r), sv.head(r), svd.matrixV().leftCols(r));
}

LambdaCheck lambda_bound_check(const SpectralSummary& s, std::size_t k) {
  LambdaCheck out;
  const double kd = static_cast<double>(k);
  for (std::size_t t = 1; t <= s.rank; ++t) {
    const double margin = s.lambda[t - 1] - std::pow(static_cast<double>(t), 1.5) / kd;
    out.margins.push_back(margin);
    if (margin < -1e-9 && !out.violation) out.violation = t;
  }
  return out;
}

RowMajorMatrix path_distance_matrix(std::size_t k) {
  RowMajorMatrix d(k, k);
  for (std::size_t i = 0; i < k; ++i)
    for (std::size_t j = 0; j < k; ++j)
      d(i, j) = std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(k);
  return d;
}

PathInverseCheck path_distance_inverse_check(std::size_t k) {
  if (k < 2) throw ValidationError("path distance check needs k >= 2");
  const auto n = static_cast<Eigen::Index>(k);
  const Eigen::MatrixXd d = path_distance_matrix(k);
  const Eigen::MatrixXd e = static_cast<double>(k) * d;
  // -L(P_k)/2 + v v^T / (2(k-1)), v = e_1 + e_k.
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (Eigen::Index i = 0; i + 1 < n; ++i) {
    lap(i, i) += 1;
    lap(i + 1, i + 1) += 1;
    lap(i, i + 1) -= 1;
    lap(i + 1, i) -= 1;
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v(0) = 1;
  v(n - 1) = 1;
  const Eigen::MatrixXd inv = -0.5 * lap + v * v.transpose() / (2.0 * static_cast<double>(k - 1));
  PathInverseCheck out{};
  out.residual = (e * inv - Eigen::MatrixXd::Identity(n, n)).cwiseAbs().maxCoeff();
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(d);
  out.lambda_k = svd.singularValues().cwiseInverse().sum();
  out.bound = std::sqrt(1.5) * static_cast<double>(k) * static_cast<double>(k);
  return out;
}

DiscrepancyReport brute_force_discrepancy(const TargetFn& f, const ProbVec& theta_x, const ProbVec& theta_y) {
  const std::size_t rows = f.rows(), cols = f.cols();
  if (theta_x.domain_size() != rows || theta_y.domain_size() != cols) {
    throw DimensionError("base distributions do not fit the function");
  }
  if (rows > kDiscrepancyRowCap) {
    throw CapExceeded("discrepancy enumeration is limited to " + std::to_string(kDiscrepancyRowCap) + " rows");
  }
  DiscrepancyReport out;
  out.theta_x = theta_x.to_dense();
  out.theta_y = theta_y.to_dense();
  std::vector<std::vector<double>> w(rows, std::vector<double>(cols));
  for (std::size_t x = 0; x < rows; ++x)
    for (std::size_t y = 0; y < cols; ++y) w[x][y] = out.theta_x[x] * out.theta_y[y] * f(x, y);

  // Gray code walk: one row toggles per step.
  std::vector<double> c(cols, 0.0);
  std::uint64_t mask = 0, best_mask = 0;
  bool best_positive = true;
  double best = 0.0;
  const std::uint64_t steps = std::uint64_t{1} << rows;
  for (std::uint64_t i = 1; i < steps; ++i) {
    const int bit = __builtin_ctzll(i);
    mask ^= std::uint64_t{1} << bit;
    const double sign = (mask >> bit) & 1 ? 1.0 : -1.0;
    double pos = 0.0, neg = 0.0;
    for (std::size_t y = 0; y < cols; ++y) {
      c[y] += sign * w[bit][y];
      (c[y] > 0.0 ? pos : neg) += c[y];
    }
    if (pos > best) {
      best = pos;
      best_mask = mask;
      best_positive = true;
    }
    if (-neg > best) {
      best = -neg;
      best_mask = mask;
      best_positive = false;
    }
  }
  // Rebuild the witness from scratch so it does not inherit drift.
  for (std::size_t x = 0; x < rows; ++x)
    if ((best_mask >> x) & 1) out.witness_rows.push_back(x);
  for (std::size_t y = 0; y < cols; ++y) {
    double s = 0.0;
    for (auto x : out.witness_rows) s += w[x][y];
    if (best_positive ? s > 0.0 : s < 0.0) out.witness_cols.push_back(y);
  }
  out.value = rectangle_bias(f, out.theta_x, out.theta_y, out.witness_rows, out.witness_cols);
  return out;
}

DiscrepancyReport brute_force_discrepancy(const TargetFn& f) {
  return brute_force_discrepancy(f, ProbVec::uniform(f.rows()), ProbVec::uniform(f.cols()));
}

double rectangle_bias(const TargetFn& f, const std::vector<double>& theta_x, const std::vector<double>& theta_y,
                      const std::vector<std::size_t>& rows, const std::vector<std::size_t>& cols) {
  double s = 0.0;
  for (auto x : rows)
    for (auto y : cols) s += theta_x[x] * theta_y[y] * f(x, y);
  return std::abs(s);
}

}  // namespace estcomm
