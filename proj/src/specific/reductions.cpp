#include <algorithm>
#include <cmath>
#include <string>

#include "estcomm/errors.hpp"
#include "estcomm/generic.hpp"
#include "estcomm/specific.hpp"

namespace estcomm {

namespace {

constexpr double kSlopeSlack = 1e-9;

}  // namespace

std::vector<double> ConvexMeasure::masses() const {
  std::vector<double> out(cdf.size());
  double prev = 0.0;
  for (std::size_t i = 0; i < cdf.size(); ++i) {
    out[i] = cdf[i] - prev;
    prev = cdf[i];
  }
  return out;
}

double ConvexMeasure::mean() const {
  const auto w = masses();
  const double m = static_cast<double>(grid());
  double s = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * static_cast<double>(i) / m;
  return s;
}

double ConvexMeasure::evaluate(double x) const {
  const auto w = masses();
  const double m = static_cast<double>(grid());
  double s = shift;
  for (std::size_t i = 0; i < w.size(); ++i) s += w[i] * std::abs(x - static_cast<double>(i) / m);
  return s;
}

std::size_t ConvexMeasure::sample(Rng& rng) const {
  const double u = rng.uniform();
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return std::min(static_cast<std::size_t>(it - cdf.begin()), cdf.size() - 1);
}

ConvexMeasure convex_to_measure(const std::vector<double>& values) {
  if (values.size() < 2) throw ValidationError("convex function needs at least two grid points");
  const std::size_t m = values.size() - 1;
  const double md = static_cast<double>(m);
  ConvexMeasure out;
  out.cdf.resize(m + 1);
  double prev = -1.0;
  for (std::size_t i = 0; i < m; ++i) {
    double s = (values[i + 1] - values[i]) * md;
    if (!std::isfinite(s) || std::abs(s) > 1.0 + kSlopeSlack) {
      throw ValidationError("slope " + std::to_string(s) + " in grid cell " + std::to_string(i) +
                            " breaks the 1-Lipschitz bound");
    }
    if (s < prev - kSlopeSlack) {
      throw ValidationError("convexity violated at grid cell " + std::to_string(i));
    }
    s = std::clamp(std::max(s, prev), -1.0, 1.0);
    out.cdf[i] = (1.0 + s) / 2.0;
    prev = s;
  }
  out.cdf[m] = 1.0;
  out.shift = values[0] - out.mean();
  return out;
}

ConvexMixture convex_mixture(const ProbVec& p, const TargetFn& f) {
  const std::size_t cols = f.cols();
  std::vector<double> mass(cols, 0.0);
  double shift = 0.0;
  std::vector<double> slice(cols);
  for (const auto& e : p.support()) {
    for (std::size_t y = 0; y < cols; ++y) slice[y] = f(e.index, y);
    ConvexMeasure d;
    try {
      d = convex_to_measure(slice);
    } catch (const ValidationError& err) {
      throw ValidationError("slice x=" + std::to_string(e.index) + ": " + err.what());
    }
    const auto w = d.masses();
    for (std::size_t y = 0; y < cols; ++y) mass[y] += e.value * w[y];
    shift += e.value * d.shift;
  }
  return {SignedVec::from_dense(mass).normalized(), shift};
}

EstimateReport convex_lipschitz_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f,
                                         const ProtocolConfig& cfg) {
  cfg.validate();
  if (p.domain_size() != f.rows() || q.domain_size() != f.cols()) {
    throw DimensionError("inputs do not fit the function");
  }
  const double eps = cfg.epsilon;
  const auto mix = convex_mixture(p, f);
  auto r = abs_protocol(mix.D, q, cfg.with_epsilon(0.75 * eps));
  const auto c = quantize_range(std::clamp(mix.shift, -2.0, 2.0), -2.0, 2.0, 0.5 * eps);
  EstimateReport out;
  out.ledger.absorb(r.ledger, "abs/");
  out.ledger.send(Party::Alice, c.bits, "convex/shift");
  out.estimate = c.decoded + r.estimate;
  out.seed = cfg.seed;
  out.set_truth(exact_expectation(p, q, f));
  return out;
}

double smooth_derivative(const SmoothSpec& s, double x, double y, int order, double step) {
  if (s.analytic || order == 0) return s.fn(x, y, order);
  return (smooth_derivative(s, x, y + step, order - 1, step) - smooth_derivative(s, x, y - step, order - 1, step)) /
         (2.0 * step);
}

EstimateReport smooth_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                               int order, SmoothTrace* trace) {
  cfg.validate();
  const SmoothSpec* spec = f.smooth();
  if (spec == nullptr || !spec->fn) throw ValidationError("smooth protocol needs a derivative oracle");
  if (order < 1) throw ValidationError("derivative order must be at least 1");
  if (p.domain_size() != f.rows() || q.domain_size() != f.cols()) {
    throw DimensionError("inputs do not fit the function");
  }
  const double eps = cfg.epsilon;
  const std::size_t m = f.grid();
  const double md = static_cast<double>(m);
  const double alpha = std::pow(eps, 1.0 / (order + 1));
  const auto J = static_cast<std::size_t>(std::ceil(1.0 / alpha - 1e-12));
  const double width = 1.0 / static_cast<double>(J);
  const double fd = width / 100.0;
  auto interval = [&](std::size_t y) {
    return std::min(static_cast<std::size_t>(std::floor(static_cast<double>(y) / md / width)), J - 1);
  };

  // deriv[(x * J + j) * order + i] = d^i/dy^i f(x/m, j * width)
  std::vector<double> deriv((m + 1) * J * order);
  for (std::size_t x = 0; x <= m; ++x) {
    for (std::size_t j = 0; j < J; ++j) {
      for (int i = 0; i < order; ++i) {
        deriv[(x * J + j) * order + i] = smooth_derivative(*spec, x / md, j * width, i, fd);
      }
    }
  }
  std::vector<double> fact(order, 1.0);
  for (int i = 1; i < order; ++i) fact[i] = fact[i - 1] * i;
  auto taylor = [&](std::size_t x, std::size_t y) {
    const std::size_t j = interval(y);
    const double h = y / md - j * width;
    double s = 0.0, pw = 1.0;
    for (int i = 0; i < order; ++i) {
      s += deriv[(x * J + j) * order + i] / fact[i] * pw;
      pw *= h;
    }
    return s;
  };

  // Alice: averaged Taylor coefficients.
  const double eta = eps / (2.0 * order);
  std::uint64_t bits = 0;
  std::vector<double> moments(J * order, 0.0);
  for (std::size_t j = 0; j < J; ++j) {
    for (int i = 0; i < order; ++i) {
      double s = 0.0;
      for (const auto& e : p.support()) s += e.value * deriv[(e.index * J + j) * order + i];
      const double b = spec->derivative_bound ? spec->derivative_bound(i) : 1.0;
      if (b <= 0.0) continue;
      const auto v = quantize_range(std::clamp(s, -b, b), -b, b, eta);
      moments[j * order + i] = v.decoded;
      bits += v.bits;
    }
  }
  // Bob: combine with his local moments E_q[1{y in I_j} (y - j w)^i].
  double first = 0.0;
  for (const auto& e : q.support()) {
    const std::size_t j = interval(e.index);
    const double h = e.index / md - j * width;
    double pw = 1.0;
    for (int i = 0; i < order; ++i) {
      first += e.value * moments[j * order + i] / fact[i] * pw;
      pw *= h;
    }
  }

  // Residual f - f_hat is small everywhere; estimate it on the input grid.
  RowMajorMatrix resid(m + 1, m + 1);
  double bound = 0.0;
  for (std::size_t x = 0; x <= m; ++x) {
    for (std::size_t y = 0; y <= m; ++y) {
      const double v = f(x, y) - taylor(x, y);
      resid(static_cast<Eigen::Index>(x), static_cast<Eigen::Index>(y)) = v;
      bound = std::max(bound, std::abs(v));
    }
  }
  EstimateReport out;
  const double budget = 0.75 * eps;
  double second = 0.0;
  const bool skip = bound <= budget;
  if (!skip) {
    resid /= bound;
    const TargetFn rf = TargetFn::from_dense(resid.cwiseMax(-1.0).cwiseMin(1.0), Family::DENSE_CUSTOM, "residual");
    const auto r = debiasing_protocol(p, q, rf, cfg.with_epsilon(budget / bound));
    second = bound * r.estimate;
    out.ledger.absorb(r.ledger, "residual/");
  }
  out.ledger.send(Party::Alice, bits, "smooth/moments");
  out.estimate = first + second;
  out.seed = cfg.seed;
  out.set_truth(exact_expectation(p, q, f));
  if (trace != nullptr) *trace = {alpha, J, bound, skip};
  return out;
}

}  // namespace estcomm
