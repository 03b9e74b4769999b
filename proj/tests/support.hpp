#pragma once

// Small helpers shared by unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <vector>

#include "estcomm/core.hpp"
#include "estcomm/prob_vec.hpp"
#include "estcomm/rng.hpp"
#include "estcomm/target_fn.hpp"

namespace testutil {

inline estcomm::ProbVec random_dense(std::size_t n, estcomm::Rng& rng) {
  std::vector<double> w(n);
  double s = 0.0;
  for (auto& v : w) {
    v = -std::log(1.0 - rng.uniform());  // exponential weights give a flat Dirichlet
    s += v;
  }
  for (auto& v : w) v /= s;
  double t = 0.0;
  for (double v : w) t += v;
  w[0] += 1.0 - t;
  return estcomm::ProbVec::from_dense(w);
}

inline estcomm::ProbVec random_sparse(std::size_t n, std::size_t support, estcomm::Rng& rng) {
  std::vector<estcomm::Entry> e;
  std::vector<bool> used(n, false);
  double s = 0.0;
  while (e.size() < std::min(support, n)) {
    const auto x = static_cast<std::size_t>(rng.below(n));
    if (used[x]) continue;
    used[x] = true;
    const double v = -std::log(1.0 - rng.uniform()) + 1e-3;
    e.push_back({x, v});
    s += v;
  }
  double t = 0.0;
  for (auto& x : e) {
    x.value /= s;
    t += x.value;
  }
  e[0].value += 1.0 - t;
  return estcomm::ProbVec::from_sparse(n, e);
}

inline estcomm::RowMajorMatrix random_matrix(std::size_t r, std::size_t c, estcomm::Rng& rng) {
  estcomm::RowMajorMatrix a(r, c);
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j) a(i, j) = 2.0 * rng.uniform() - 1.0;
  return a;
}

// Independent evaluation through full dense vectors.
inline double dense_triple_loop(const estcomm::ProbVec& p, const estcomm::ProbVec& q, const estcomm::TargetFn& f) {
  const auto pd = p.to_dense();
  const auto qd = q.to_dense();
  double s = 0.0;
  for (std::size_t x = 0; x < pd.size(); ++x)
    for (std::size_t y = 0; y < qd.size(); ++y) s += pd[x] * qd[y] * f(x, y);
  return s;
}

// Upper end of the Wilson score interval.
inline double wilson_upper(std::size_t failures, std::size_t n, double z = 2.5758) {
  const double ph = static_cast<double>(failures) / n;
  const double z2 = z * z;
  const double centre = ph + z2 / (2.0 * n);
  const double half = z * std::sqrt(ph * (1 - ph) / n + z2 / (4.0 * n * n));
  return (centre + half) / (1 + z2 / n);
}


// Least-squares slope of log(y) against log(x).
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double a = std::log(x[i]), b = std::log(y[i]);
    sx += a;
    sy += b;
    sxx += a * a;
    sxy += a * b;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Max |E[f 1_{S x T}]| over every row set S and column set T.
inline double full_rectangle_discrepancy(const estcomm::TargetFn& f, const std::vector<double>& tx,
                                         const std::vector<double>& ty) {
  const std::size_t r = f.rows(), c = f.cols();
  double best = 0.0;
  for (std::uint64_t s = 0; s < (std::uint64_t{1} << r); ++s)
    for (std::uint64_t t = 0; t < (std::uint64_t{1} << c); ++t) {
      double v = 0.0;
      for (std::size_t x = 0; x < r; ++x)
        if ((s >> x) & 1)
          for (std::size_t y = 0; y < c; ++y)
            if ((t >> y) & 1) v += tx[x] * ty[y] * f(x, y);
      best = std::max(best, std::abs(v));
    }
  return best;
}

}  // namespace testutil
