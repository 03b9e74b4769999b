#include <algorithm>
#include <cmath>
#include <string>

#include "estcomm/errors.hpp"
#include "estcomm/generic.hpp"
#include "estcomm/specific.hpp"

namespace estcomm {

namespace {

constexpr double kMassSlack = 1e-12;

// Masses and conditional means of p on the given intervals.
PartitionSpec fill(std::vector<std::size_t> endpoints, const ProbVec& p) {
  PartitionSpec out;
  out.endpoints = std::move(endpoints);
  const std::size_t m = out.endpoints.size() - 1;
  out.masses.assign(m, 0.0);
  std::vector<double> moment(m, 0.0);
  std::size_t j = 0;
  for (const auto& e : p.support()) {
    while (out.endpoints[j + 1] <= e.index) ++j;
    out.masses[j] += e.value;
    moment[j] += e.value * static_cast<double>(e.index);
  }
  out.cond_means.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    out.cond_means[i] = out.masses[i] > 0.0
                            ? std::clamp(moment[i] / out.masses[i], static_cast<double>(out.begin(i)),
                                         static_cast<double>(out.end(i) - 1))
                            : 0.5 * static_cast<double>(out.begin(i) + out.end(i) - 1);
  }
  return out;
}

// Cumulative sums of q and of q(y) * y over its sorted support.
struct Prefix {
  std::vector<std::size_t> idx;
  std::vector<double> mass;    // mass[i] = q(<= idx[i])
  std::vector<double> moment;  // sum of q(y) y over y <= idx[i]

  explicit Prefix(const ProbVec& q) {
    double a = 0.0, b = 0.0;
    for (const auto& e : q.support()) {
      a += e.value;
      b += e.value * static_cast<double>(e.index);
      idx.push_back(e.index);
      mass.push_back(a);
      moment.push_back(b);
    }
  }
  // Sums over y < x.
  std::pair<double, double> below(std::size_t x) const {
    const auto k = static_cast<std::size_t>(std::lower_bound(idx.begin(), idx.end(), x) - idx.begin());
    return k == 0 ? std::pair{0.0, 0.0} : std::pair{mass[k - 1], moment[k - 1]};
  }
};

// q(I ∩ [0, x]) for x in I = [b, e).
double gt_inner(const Prefix& q, std::size_t b, std::size_t x) {
  return q.below(x + 1).first - q.below(b).first;
}

// Sum over y in [b, e) of q(y) |x - y|, index units.
double abs_inner(const Prefix& q, std::size_t b, std::size_t e, std::size_t x) {
  const auto [m0, s0] = q.below(b);
  const auto [mx, sx] = q.below(x + 1);
  const auto [m1, s1] = q.below(e);
  const double xd = static_cast<double>(x);
  return (xd * (mx - m0) - (sx - s0)) + ((s1 - sx) - xd * (m1 - mx));
}

std::uint64_t endpoint_bits(const PartitionSpec& s, std::size_t n) {
  // Count, then the interior endpoints.
  return index_bits(n) * s.size();
}

EstimateReport gt_once(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg) {
  const double eps = cfg.epsilon;
  const std::size_t n = p.domain_size();
  const std::uint64_t nb = index_bits(n);
  const double beta = std::min(0.5, cfg.constant("gt_beta_c", 1.0) * std::pow(eps, 2.0 / 3.0));
  const auto k = static_cast<std::size_t>(std::ceil(cfg.constant("gt_k", 4.0) * (beta / eps) * (beta / eps)));
  Rng root(cfg.seed);
  EstimateReport r;

  const auto bob = interval_partition(q, beta, false);
  r.ledger.send(Party::Bob, endpoint_bits(bob, n), "gt/bob_endpoints");

  const auto alice = interval_partition(p, beta, false);
  const auto ref = refine(alice.endpoints, bob.endpoints, p);
  r.ledger.send(Party::Alice, endpoint_bits(alice, n), "gt/alice_endpoints");
  const double eta = eps * eps * eps;
  std::vector<double> pm(ref.size());
  std::uint64_t bits = 0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    const auto v = quantize_range(std::min(ref.masses[j], 1.0), 0.0, 1.0, eta);
    pm[j] = v.decoded;
    bits += v.bits;
  }
  r.ledger.send(Party::Alice, bits, "gt/masses");
  Rng ra = root.split(1);
  std::vector<std::size_t> xs(k);
  for (auto& x : xs) x = p.sample(ra);
  r.ledger.send(Party::Alice, k * nb, "gt/samples");

  // Bob: cross terms exactly, singletons exactly, the rest from the samples.
  const auto qs = fill(ref.endpoints, q);
  const Prefix qp(q);
  double cross = 0.0, below = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    cross += pm[j] * below;
    if (ref.end(j) - ref.begin(j) == 1) cross += pm[j] * qs.masses[j];
    below += qs.masses[j];
  }
  double inner = 0.0;
  for (auto x : xs) {
    const std::size_t j = ref.locate(x);
    if (ref.end(j) - ref.begin(j) > 1) inner += gt_inner(qp, ref.begin(j), x);
  }
  r.estimate = cross + inner / static_cast<double>(k);
  return r;
}

EstimateReport abs_once(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg) {
  const double eps = cfg.epsilon;
  const std::size_t n = p.domain_size();
  const std::uint64_t nb = index_bits(n);
  EstimateReport r;
  if (n == 1) return r;
  const double span = static_cast<double>(n - 1);
  const double beta = std::min(0.5, cfg.constant("abs_beta_c", 1.0) * std::pow(eps, 2.0 / 5.0));
  const double b2 = beta * beta / eps;
  const auto k = static_cast<std::size_t>(std::ceil(cfg.constant("abs_k", 4.0) * b2 * b2));
  Rng root(cfg.seed);

  const auto bob = interval_partition(q, beta, true);
  r.ledger.send(Party::Bob, endpoint_bits(bob, n), "abs/bob_endpoints");

  const auto alice = interval_partition(p, beta, true);
  const auto ref = refine(alice.endpoints, bob.endpoints, p);
  r.ledger.send(Party::Alice, endpoint_bits(alice, n), "abs/alice_endpoints");
  const double eta = std::pow(eps, cfg.constant("abs_precision_exp", 3.0));
  std::vector<double> pm(ref.size()), mu(ref.size());
  std::uint64_t bits = 0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    const auto v = quantize_range(std::min(ref.masses[j], 1.0), 0.0, 1.0, eta);
    pm[j] = v.decoded;
    bits += v.bits;
    if (v.code != 0) {
      const auto c = quantize_range(ref.cond_means[j] / span, 0.0, 1.0, eta);
      mu[j] = c.decoded;
      bits += c.bits;
    }
  }
  r.ledger.send(Party::Alice, bits, "abs/masses_and_means");
  Rng ra = root.split(1);
  std::vector<std::size_t> xs(k);
  for (auto& x : xs) x = p.sample(ra);
  r.ledger.send(Party::Alice, k * nb, "abs/samples");

  const auto qs = fill(ref.endpoints, q);
  const Prefix qp(q);
  double cross = 0.0;
  for (std::size_t j = 0; j < ref.size(); ++j) {
    if (pm[j] == 0.0) continue;
    for (std::size_t l = 0; l < ref.size(); ++l) {
      if (l != j) cross += pm[j] * qs.masses[l] * std::abs(mu[j] - qs.cond_means[l] / span);
    }
  }
  double inner = 0.0;
  for (auto x : xs) {
    const std::size_t j = ref.locate(x);
    if (ref.end(j) - ref.begin(j) > 1) inner += abs_inner(qp, ref.begin(j), ref.end(j), x) / span;
  }
  r.estimate = cross + inner / static_cast<double>(k);
  return r;
}

void check_common(const ProbVec& p, const ProbVec& q) {
  if (p.domain_size() != q.domain_size()) throw DimensionError("inputs need a common ordered domain");
}

}  // namespace

std::size_t PartitionSpec::locate(std::size_t x) const {
  return static_cast<std::size_t>(std::upper_bound(endpoints.begin(), endpoints.end(), x) - endpoints.begin()) - 1;
}

PartitionSpec interval_partition(const ProbVec& p, double beta, bool strong) {
  if (!(beta > 0.0 && beta < 1.0)) throw ValidationError("partition threshold must lie in (0,1)");
  const std::size_t n = p.domain_size();
  const std::size_t width =
      strong ? static_cast<std::size_t>(std::floor(beta * static_cast<double>(n - 1))) + 1 : n;
  std::vector<std::size_t> ends{0};
  std::vector<std::size_t> atoms;
  std::size_t start = 0;
  double acc = 0.0;
  auto close = [&](std::size_t at) {
    ends.push_back(at);
    start = at;
    acc = 0.0;
  };
  for (const auto& e : p.support()) {
    while (e.index - start + 1 > width) close(start + width);
    if (e.value > beta + kMassSlack) {
      if (e.index > start) close(e.index);
      close(e.index + 1);
      atoms.push_back(e.index);
    } else if (acc + e.value > beta + kMassSlack) {
      close(e.index);
      acc = e.value;
    } else {
      acc += e.value;
    }
  }
  while (n - start > width) close(start + width);
  if (start < n) ends.push_back(n);
  auto out = fill(std::move(ends), p);
  out.heavy_atoms = std::move(atoms);
  return out;
}

PartitionSpec refine(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, const ProbVec& p) {
  std::vector<std::size_t> ends;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(ends));
  if (ends.size() < 2 || ends.front() != 0 || ends.back() != p.domain_size()) {
    throw ValidationError("partitions do not cover the domain");
  }
  return fill(std::move(ends), p);
}

double gt_decomposition_value(const ProbVec& p, const ProbVec& q, const std::vector<std::size_t>& endpoints) {
  check_common(p, q);
  const auto ps = fill(endpoints, p);
  const auto qs = fill(endpoints, q);
  const Prefix qp(q);
  double within = 0.0;
  for (const auto& e : p.support()) within += e.value * gt_inner(qp, ps.begin(ps.locate(e.index)), e.index);
  double cross = 0.0, below = 0.0;
  for (std::size_t j = 0; j < ps.size(); ++j) {
    cross += ps.masses[j] * below;
    below += qs.masses[j];
  }
  return within + cross;
}

double abs_decomposition_value(const ProbVec& p, const ProbVec& q, const std::vector<std::size_t>& endpoints) {
  check_common(p, q);
  const auto ps = fill(endpoints, p);
  const auto qs = fill(endpoints, q);
  const Prefix qp(q);
  double within = 0.0;
  for (const auto& e : p.support()) {
    const std::size_t j = ps.locate(e.index);
    within += e.value * abs_inner(qp, ps.begin(j), ps.end(j), e.index);
  }
  double cross = 0.0;
  for (std::size_t j = 0; j < ps.size(); ++j) {
    for (std::size_t l = 0; l < ps.size(); ++l) {
      if (l != j) cross += ps.masses[j] * qs.masses[l] * std::abs(ps.cond_means[j] - qs.cond_means[l]);
    }
  }
  return within + cross;
}

double exact_gt(const ProbVec& p, const ProbVec& q) {
  check_common(p, q);
  const Prefix qp(q);
  double s = 0.0;
  for (const auto& e : p.support()) s += e.value * qp.below(e.index + 1).first;
  return s;
}

double exact_abs(const ProbVec& p, const ProbVec& q) {
  check_common(p, q);
  const std::size_t n = p.domain_size();
  if (n == 1) return 0.0;
  const Prefix qp(q);
  double s = 0.0;
  for (const auto& e : p.support()) s += e.value * abs_inner(qp, 0, n, e.index);
  return s / static_cast<double>(n - 1);
}

EstimateReport gt_protocol(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg) {
  cfg.validate();
  check_common(p, q);
  auto r = amplify(cfg, kBaseFailure, [&](const ProtocolConfig& c) { return gt_once(p, q, c); });
  r.seed = cfg.seed;
  r.set_truth(exact_gt(p, q));
  return r;
}

EstimateReport abs_protocol(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg) {
  cfg.validate();
  check_common(p, q);
  auto r = amplify(cfg, kBaseFailure, [&](const ProtocolConfig& c) { return abs_once(p, q, c); });
  r.seed = cfg.seed;
  r.set_truth(exact_abs(p, q));
  return r;
}

EstimateReport toeplitz_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg) {
  cfg.validate();
  if (f.family() != Family::TOEPLITZ) throw ValidationError("toeplitz protocol needs a Toeplitz function");
  const std::size_t n = f.rows();
  if (p.domain_size() != n || q.domain_size() != n || f.cols() != n) {
    throw DimensionError("inputs do not fit the function");
  }
  // a_d for d = x - y in [-(n-1), n-1], stored at d + n - 1.
  std::vector<double> a(2 * n - 1);
  for (std::size_t d = 0; d < n; ++d) {
    a[n - 1 + d] = f(d, 0);
    a[n - 1 - d] = f(0, d);
  }
  // f(x, y) = a_min + sum_c delta_c [x - c >= y]; shift both sides by n - 1.
  struct Change {
    std::ptrdiff_t c;
    double delta;
  };
  std::vector<Change> changes;
  double total = 0.0;
  for (std::size_t i = 1; i < a.size(); ++i) {
    if (a[i] != a[i - 1]) {
      changes.push_back({static_cast<std::ptrdiff_t>(i) - static_cast<std::ptrdiff_t>(n - 1), a[i] - a[i - 1]});
      total += std::abs(a[i] - a[i - 1]);
    }
  }
  const std::size_t ext = 3 * n - 2;
  const auto off = static_cast<std::ptrdiff_t>(n - 1);
  std::vector<Entry> qe;
  for (const auto& e : q.support()) qe.push_back({e.index + n - 1, e.value});
  const ProbVec qx = ProbVec::from_sparse(ext, std::move(qe));

  EstimateReport out;
  out.seed = cfg.seed;
  double est = a.front();
  if (!changes.empty()) {
    const double inner = std::min(0.5, cfg.epsilon / total);
    Rng root(cfg.seed);
    std::vector<CostLedger> ledgers;
    for (std::size_t i = 0; i < changes.size(); ++i) {
      std::vector<Entry> pe;
      for (const auto& e : p.support()) {
        pe.push_back({static_cast<std::size_t>(static_cast<std::ptrdiff_t>(e.index) - changes[i].c + off), e.value});
      }
      ProtocolConfig c = cfg.with_epsilon(inner).with_seed(root.split(200 + i).next());
      c.delta = cfg.delta / static_cast<double>(changes.size());
      const auto r = gt_protocol(ProbVec::from_sparse(ext, std::move(pe)), qx, c);
      est += changes[i].delta * r.estimate;
      ledgers.push_back(r.ledger);
    }
    out.ledger = CostLedger::parallel(ledgers, "toeplitz/");
  }
  out.estimate = est;
  out.set_truth(exact_expectation(p, q, f));
  return out;
}

}  // namespace estcomm
