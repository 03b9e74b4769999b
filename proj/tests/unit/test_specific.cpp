#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "estcomm/errors.hpp"
#include "estcomm/specific.hpp"
#include "support.hpp"

using namespace estcomm;

namespace {

ProtocolConfig config(double eps, std::uint64_t seed) {
  ProtocolConfig c;
  c.epsilon = eps;
  c.seed = seed;
  return c;
}

double inner(const ProbVec& p, const ProbVec& q) {
  const auto a = p.to_dense(), b = q.to_dense();
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Random distribution with some atoms far above beta.
ProbVec spiky(std::size_t n, Rng& rng) {
  std::vector<double> w(n, 0.0);
  const std::size_t atoms = rng.below(4);
  for (std::size_t i = 0; i < atoms; ++i) w[rng.below(n)] += 0.1 + rng.uniform();
  const std::size_t support = 1 + rng.below(n);
  for (std::size_t i = 0; i < support; ++i) w[rng.below(n)] += rng.uniform() / support;
  const double s = std::accumulate(w.begin(), w.end(), 0.0);
  for (auto& v : w) v /= s;
  return SignedVec::from_dense(w).normalized();
}

double slope_of_bits(const std::vector<double>& eps, const std::vector<double>& bits) {
  std::vector<double> inv;
  for (double e : eps) inv.push_back(1.0 / e);
  return testutil::loglog_slope(inv, bits);
}

}  // namespace

TEST_CASE("heavy truncation examples") {
  const auto d = heavy_truncate(ProbVec::point_mass(50, 7), 0.3);
  REQUIRE(d.entries().size() == 1);
  CHECK(d[7] == 1.0);
  CHECK(heavy_truncate(ProbVec::uniform(64), 0.05).entries().empty());
}

TEST_CASE("heavy truncation drop bound against 100 random q") {
  Rng rng(3);
  for (double eps : {0.3, 0.1, 0.02}) {
    const auto p = testutil::random_sparse(200, 40, rng);
    const auto pt = heavy_truncate(p, eps);
    CHECK(pt.entries().size() <= static_cast<std::size_t>(1.0 / eps));
    for (const auto& e : pt.entries()) CHECK(e.value >= eps);
    for (int t = 0; t < 100; ++t) {
      const auto q = testutil::random_sparse(200, 1 + rng.below(60), rng);
      const double drop = inner(p, q) - pt.dot(heavy_truncate(q, eps));
      CHECK(drop >= -1e-15);
      CHECK(drop <= 2.0 * eps);
    }
  }
}

TEST_CASE("hash collisions among heavy supports stay rare") {
  const double e = 0.05;
  const auto m = static_cast<std::size_t>(std::ceil(40.0 / (e * e)));
  const auto s = static_cast<std::size_t>(1.0 / e);
  const int trials = 10000;
  int collided = 0;
  for (int t = 0; t < trials; ++t) {
    const std::uint64_t key = Rng(static_cast<std::uint64_t>(t)).next();
    std::set<std::size_t> seen;
    bool hit = false;
    for (std::size_t x = 0; x < 2 * s; ++x) hit |= !seen.insert(hash_bucket(key, x * 7919, m)).second;
    collided += hit;
  }
  const double sigma = std::sqrt(0.1 * 0.9 / trials);
  CHECK(static_cast<double>(collided) / trials <= 0.1 + 3 * sigma);
}

TEST_CASE("equality on point masses and disjoint supports") {
  const std::size_t n = std::size_t{1} << 20;
  auto r = eq_protocol(ProbVec::point_mass(n, 12345), ProbVec::point_mass(n, 12345), config(0.1, 2));
  CHECK(std::abs(r.estimate - 1.0) <= 0.1);
  CHECK(r.ledger.rounds() == 2);
  auto d = eq_protocol(ProbVec::uniform_prefix(n, 30), ProbVec::from_sparse(n, {{500, 0.5}, {600, 0.5}}),
                       config(0.1, 3));
  CHECK(std::abs(d.estimate) <= 0.1);
  CHECK(*d.truth == 0.0);
}

TEST_CASE("equality accuracy and cost scaling on random sparse inputs") {
  const std::size_t n = std::size_t{1} << 20;
  Rng rng(17);
  std::vector<double> eps{0.1, 0.05, 0.025}, bits;
  for (double e : eps) {
    int fails = 0;
    std::vector<double> b;
    for (int t = 0; t < 300; ++t) {
      // Shared support so the answer is not trivially zero.
      const auto p = testutil::random_sparse(64, 12, rng);
      const auto q = testutil::random_sparse(64, 12, rng);
      std::vector<Entry> pe(p.support().begin(), p.support().end()), qe(q.support().begin(), q.support().end());
      for (auto& x : pe) x.index *= 1009;
      for (auto& x : qe) x.index *= 1009;
      const auto r = eq_protocol(ProbVec::from_sparse(n, pe), ProbVec::from_sparse(n, qe),
                                 config(e, 1000 + static_cast<std::uint64_t>(t)));
      fails += *r.abs_error > e;
      b.push_back(static_cast<double>(r.ledger.total_bits()));
    }
    CHECK(fails <= 100);
    bits.push_back(testutil::median(b));
  }
  const double slope = slope_of_bits(eps, bits);
  CHECK(slope >= 0.55);
  CHECK(slope <= 0.85);
}

TEST_CASE("sparse protocol reduces to equality for the identity") {
  FamilyParams fp;
  fp.k = 40;
  const auto f = build_family(Family::EQ, fp);
  Rng rng(5);
  const auto p = testutil::random_sparse(40, 10, rng);
  const auto q = testutil::random_sparse(40, 10, rng);
  const auto a = sparse_protocol(p, q, f, config(0.1, 9));
  const auto b = eq_protocol(p, q, config(0.1, 9));
  CHECK(a.estimate == b.estimate);
  CHECK(a.ledger.total_bits() == b.ledger.total_bits());
  CHECK_THROWS_AS(sparse_protocol(p, q, build_family(Family::DISTANCE, fp), config(0.1, 1), 3), ValidationError);
}

TEST_CASE("sparse protocol on a permutation matrix") {
  const std::size_t n = 64;
  Rng rng(8);
  std::vector<std::size_t> pi(n);
  std::iota(pi.begin(), pi.end(), 0);
  std::shuffle(pi.begin(), pi.end(), rng);
  RowMajorMatrix a = RowMajorMatrix::Zero(n, n);
  for (std::size_t x = 0; x < n; ++x) a(x, pi[x]) = 1.0;
  const auto f = TargetFn::from_dense(a);
  int fails = 0;
  for (int t = 0; t < 30; ++t) {
    const auto p = testutil::random_sparse(n, 8, rng);
    const auto q = testutil::random_sparse(n, 20, rng);
    double oracle = 0.0;
    for (const auto& e : p.support()) oracle += e.value * q[pi[e.index]];
    const auto r = sparse_protocol(p, q, f, config(0.1, 40 + t));
    fails += std::abs(r.estimate - oracle) > 0.1;
  }
  CHECK(fails <= 10);
}

TEST_CASE("sparse protocol on 2-sparse signed matrices") {
  const std::size_t n = 48;
  Rng rng(12);
  int fails = 0;
  for (int t = 0; t < 200; ++t) {
    RowMajorMatrix a = RowMajorMatrix::Zero(n, n);
    for (std::size_t x = 0; x < n; ++x)
      for (int k = 0; k < 2; ++k) a(x, rng.below(n)) = (t % 2 && k) ? -0.75 : 1.0;
    const auto f = TargetFn::from_dense(a);
    const auto p = testutil::random_sparse(n, 6, rng);
    const auto q = testutil::random_sparse(n, 12, rng);
    const auto r = sparse_protocol(p, q, f, config(0.15, 700 + t), 2);
    fails += std::abs(r.estimate - testutil::dense_triple_loop(p, q, f)) > 0.15;
  }
  CHECK(fails <= 66);
}

TEST_CASE("partition examples") {
  const auto u = interval_partition(ProbVec::uniform(256), 0.25, false);
  REQUIRE(u.size() == 4);
  for (double m : u.masses) CHECK(m == doctest::Approx(0.25).epsilon(1e-12));

  for (bool strong : {false, true}) {
    const auto d = interval_partition(ProbVec::point_mass(100, 40), 0.3, strong);
    REQUIRE(d.heavy_atoms.size() == 1);
    CHECK(d.heavy_atoms[0] == 40);
    const std::size_t j = d.locate(40);
    CHECK(d.begin(j) == 40);
    CHECK(d.end(j) == 41);
    if (!strong) CHECK(d.size() <= 3);
  }
}

TEST_CASE("partition invariants on random inputs with atoms") {
  Rng rng(99);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t n = 1 + rng.below(200);
    const auto p = spiky(n, rng);
    const double beta = 0.02 + 0.9 * rng.uniform();
    const bool strong = t % 2;
    const auto s = interval_partition(p, beta, strong);
    REQUIRE(s.endpoints.front() == 0);
    REQUIRE(s.endpoints.back() == n);
    const std::size_t width = static_cast<std::size_t>(std::floor(beta * (n - 1))) + 1;
    double total = 0.0;
    for (std::size_t j = 0; j < s.size(); ++j) {
      REQUIRE(s.begin(j) < s.end(j));
      double mass = 0.0;
      for (std::size_t x = s.begin(j); x < s.end(j); ++x) mass += p[x];
      CHECK(std::abs(mass - s.masses[j]) <= 1e-12);
      total += mass;
      const bool atom = s.end(j) - s.begin(j) == 1 &&
                        std::find(s.heavy_atoms.begin(), s.heavy_atoms.end(), s.begin(j)) != s.heavy_atoms.end();
      if (!atom) CHECK(s.masses[j] <= beta + 1e-12);
      if (strong) CHECK(s.end(j) - s.begin(j) <= width);
    }
    CHECK(std::abs(total - 1.0) <= 1e-12);
    for (auto x : s.heavy_atoms) CHECK(p[x] > beta);
    const double cap = strong ? 3.0 / beta + 3.0 : 2.0 / beta + 1.0;
    CHECK(static_cast<double>(s.size()) <= cap + static_cast<double>(s.heavy_atoms.size()));
  }
}

TEST_CASE("random partitions with beta 0.1 stay within 21 intervals plus atoms") {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const auto p = testutil::random_dense(300, rng);
    const auto s = interval_partition(p, 0.1, false);
    CHECK(s.size() <= 21 + s.heavy_atoms.size());
  }
}

TEST_CASE("interval decompositions are exact") {
  Rng rng(21);
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 2 + rng.below(511);
    const auto p = spiky(n, rng);
    const auto q = testutil::random_dense(n, rng);
    std::set<std::size_t> cut{0, n};
    const std::size_t k = rng.below(20);
    for (std::size_t i = 0; i < k; ++i) cut.insert(rng.below(n));
    const std::vector<std::size_t> ends(cut.begin(), cut.end());
    // Oracles by brute force.
    const auto a = p.to_dense(), b = q.to_dense();
    double gt = 0.0, ab = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      for (std::size_t y = 0; y < n; ++y) {
        gt += a[x] * b[y] * (x >= y);
        ab += a[x] * b[y] * std::abs(static_cast<double>(x) - static_cast<double>(y));
      }
    CHECK(std::abs(gt_decomposition_value(p, q, ends) - gt) <= 1e-12);
    CHECK(std::abs(abs_decomposition_value(p, q, ends) - ab) <= 1e-12 * n);
    CHECK(std::abs(exact_gt(p, q) - gt) <= 1e-12);
    CHECK(std::abs(exact_abs(p, q) - ab / (n - 1)) <= 1e-12);
  }
}

TEST_CASE("greater-than examples") {
  auto r = gt_protocol(ProbVec::point_mass(16, 5), ProbVec::point_mass(16, 3), config(0.1, 1));
  CHECK(std::abs(r.estimate - 1.0) <= 0.1);
  CHECK(r.ledger.rounds() == 2);
  const std::size_t n = 1000;
  auto u = gt_protocol(ProbVec::uniform(n), ProbVec::uniform(n), config(0.05, 2));
  CHECK(*u.truth == doctest::Approx((n + 1.0) / (2.0 * n)).epsilon(1e-12));
  CHECK(std::abs(u.estimate - (n + 1.0) / (2.0 * n)) <= 0.05);
}

TEST_CASE("greater-than failure rate over an epsilon sweep") {
  Rng rng(31);
  for (double e : {0.1, 0.05, 0.025}) {
    int fails = 0;
    for (int t = 0; t < 150; ++t) {
      const auto p = spiky(512, rng);
      const auto q = testutil::random_dense(512, rng);
      fails += *gt_protocol(p, q, config(e, 50 + t)).abs_error > e;
    }
    CHECK(fails <= 50);
  }
}

TEST_CASE("toeplitz with few changes via shifted greater-than") {
  std::vector<double> seq(2 * 40 - 1);
  for (std::size_t i = 0; i < seq.size(); ++i) seq[i] = i < 20 ? -0.5 : (i < 45 ? 0.25 : (i < 60 ? 1.0 : 0.0));
  FamilyParams fp;
  fp.sequence = seq;
  const auto f = build_family(Family::TOEPLITZ, fp);
  Rng rng(2);
  int fails = 0;
  for (int t = 0; t < 60; ++t) {
    const auto p = testutil::random_dense(40, rng);
    const auto q = spiky(40, rng);
    const auto r = toeplitz_protocol(p, q, f, config(0.1, 300 + t));
    CHECK(std::abs(*r.truth - testutil::dense_triple_loop(p, q, f)) <= 1e-12);
    fails += *r.abs_error > 0.1;
  }
  CHECK(fails <= 20);
}

TEST_CASE("absolute difference examples") {
  const std::size_t m = 100;
  auto r = abs_protocol(ProbVec::point_mass(m + 1, 20), ProbVec::point_mass(m + 1, 85), config(0.05, 3));
  CHECK(std::abs(r.estimate - 0.65) <= 0.05);
  const std::size_t g = 1024;
  auto u = abs_protocol(ProbVec::uniform(g + 1), ProbVec::uniform(g + 1), config(0.05, 4));
  CHECK(std::abs(*u.truth - 1.0 / 3.0) <= 1e-3);
  CHECK(std::abs(u.estimate - *u.truth) <= 0.05);
}

TEST_CASE("absolute difference cost scaling") {
  const std::size_t g = 1024;
  Rng rng(77);
  std::vector<double> eps{0.1, 0.05, 0.025, 0.0125}, bits;
  for (double e : eps) {
    std::vector<double> b;
    int fails = 0;
    for (int t = 0; t < 40; ++t) {
      const auto p = testutil::random_dense(g + 1, rng);
      const auto q = testutil::random_dense(g + 1, rng);
      const auto r = abs_protocol(p, q, config(e, 900 + t));
      fails += *r.abs_error > e;
      b.push_back(static_cast<double>(r.ledger.total_bits()));
    }
    CHECK(fails <= 13);
    bits.push_back(testutil::median(b));
  }
  const double slope = slope_of_bits(eps, bits);
  CHECK(slope >= 0.25);
  CHECK(slope <= 0.55);
}

TEST_CASE("convex functions to measures") {
  const std::size_t m = 200;
  std::vector<double> v(m + 1);
  for (std::size_t i = 0; i <= m; ++i) v[i] = std::abs(i / double(m) - 0.3);
  auto d = convex_to_measure(v);
  auto w = d.masses();
  CHECK(w[60] == doctest::Approx(1.0));
  CHECK(std::abs(d.shift) <= 1e-12);

  for (std::size_t i = 0; i <= m; ++i) v[i] = i / double(m);
  d = convex_to_measure(v);
  CHECK(d.masses()[0] == doctest::Approx(1.0));
  CHECK(std::abs(d.shift) <= 1e-12);

  for (std::size_t i = 0; i <= m; ++i) v[i] = (i / double(m) - 0.5) * (i / double(m) - 0.5);
  d = convex_to_measure(v);
  CHECK(d.shift == doctest::Approx(-0.25).epsilon(1e-2));
  for (std::size_t i = 0; i <= m; i += 10) {
    const double x = i / double(m);
    CHECK(std::abs(d.evaluate(x) - v[i]) <= 2.0 / m);
    CHECK(std::abs(d.cdf[i] - x) <= 1.0 / m + 1e-12);
  }

  v.assign(m + 1, 0.0);
  v[100] = 0.001;
  CHECK_THROWS_WITH_AS(convex_to_measure(v), doctest::Contains("grid cell 100"), ValidationError);
  for (std::size_t i = 0; i <= m; ++i) v[i] = 1.5 * i / double(m);
  CHECK_THROWS_AS(convex_to_measure(v), ValidationError);
}

TEST_CASE("convex reconstruction on random piecewise-linear functions") {
  Rng rng(64);
  const std::size_t m = 256;
  for (int t = 0; t < 100; ++t) {
    // Max of a few lines with slopes in [-1, 1].
    std::vector<std::pair<double, double>> lines(1 + rng.below(6));
    for (auto& [a, b] : lines) {
      a = 2 * rng.uniform() - 1;
      b = rng.uniform() - 0.5;
    }
    std::vector<double> v(m + 1);
    for (std::size_t i = 0; i <= m; ++i) {
      double best = -1e9;
      for (auto [a, b] : lines) best = std::max(best, a * i / double(m) + b);
      v[i] = best;
    }
    const auto d = convex_to_measure(v);
    CHECK(std::abs(d.cdf.back() - 1.0) == 0.0);
    for (std::size_t i = 1; i <= m; ++i) CHECK(d.cdf[i] >= d.cdf[i - 1]);
    double worst = 0.0;
    for (std::size_t i = 0; i <= m; ++i) worst = std::max(worst, std::abs(d.evaluate(i / double(m)) - v[i]));
    CHECK(worst <= 2.0 / m);
    Rng s(t);
    std::size_t z = d.sample(s);
    CHECK(z <= m);
  }
}

TEST_CASE("convex-Lipschitz protocol") {
  const std::size_t m = 256;
  FamilyParams fp;
  fp.m = m;
  const auto abs_f = build_family(Family::ABS_GRID, fp);
  Rng rng(6);
  const auto p = testutil::random_dense(m + 1, rng);
  const auto mix = convex_mixture(p, abs_f);
  CHECK(std::abs(mix.shift) <= 1e-12);
  for (std::size_t x = 0; x <= m; ++x) CHECK(std::abs(mix.D[x] - p[x]) <= 1e-12);

  const auto sq = make_grid_function(m, [](double, double y) { return (y - 0.5) * (y - 0.5); }, "sq");
  const auto q = testutil::random_dense(m + 1, rng);
  double oracle = 0.0;
  for (std::size_t y = 0; y <= m; ++y) oracle += q[y] * (y / double(m) - 0.5) * (y / double(m) - 0.5);
  CHECK(std::abs(convex_lipschitz_protocol(p, q, sq, config(0.05, 1)).estimate - oracle) <= 0.05);

  const auto hinge = make_grid_function(m, [](double x, double y) { return std::max(y - x, 0.0); }, "hinge");
  int fails = 0;
  for (int t = 0; t < 200; ++t) {
    const auto a = spiky(m + 1, rng);
    const auto b = testutil::random_dense(m + 1, rng);
    const auto r = convex_lipschitz_protocol(a, b, hinge, config(0.05, 100 + t));
    fails += std::abs(r.estimate - testutil::dense_triple_loop(a, b, hinge)) > 0.05;
  }
  CHECK(fails <= 20);

  const auto concave = make_grid_function(m, [](double, double y) { return -(y - 0.5) * (y - 0.5); }, "cap");
  CHECK_THROWS_AS(convex_lipschitz_protocol(p, q, concave, config(0.05, 1)), ValidationError);
}

TEST_CASE("smooth protocol on a separable polynomial") {
  const std::size_t m = 128;
  const auto f = make_smooth_grid(smooth_catalog("poly_separable"), m);
  Rng rng(10);
  const auto p = testutil::random_dense(m + 1, rng);
  const auto q = testutil::random_dense(m + 1, rng);
  double eu = 0.0, ev = 0.0;
  for (std::size_t i = 0; i <= m; ++i) {
    eu += p[i] * (1.0 + i / double(m)) / 2.0;
    ev += q[i] * (i / double(m)) * (i / double(m));
  }
  const auto r = smooth_protocol(p, q, f, config(0.02, 3), 2);
  CHECK(std::abs(r.estimate - eu * ev) <= 0.02);
  FamilyParams fp;
  fp.m = m;
  CHECK_THROWS_AS(smooth_protocol(p, q, build_family(Family::ABS_GRID, fp), config(0.05, 1), 2), ValidationError);
}

TEST_CASE("smooth protocol on (x+y)^2/8") {
  const std::size_t m = 100;
  const auto f = make_smooth_grid(smooth_catalog("quad_sum"), m);
  Rng rng(11);
  int fails = 0;
  for (int t = 0; t < 200; ++t) {
    const auto p = spiky(m + 1, rng);
    const auto q = testutil::random_dense(m + 1, rng);
    const auto r = smooth_protocol(p, q, f, config(0.02, 500 + t), 2);
    CHECK(std::abs(*r.truth - testutil::dense_triple_loop(p, q, f)) <= 1e-12);
    fails += *r.abs_error > 0.02;
  }
  CHECK(fails <= 20);
}

TEST_CASE("smooth protocol cost drops with derivative order") {
  const std::size_t m = 200;
  const auto f = make_smooth_grid(smooth_catalog("sin_sum"), m);
  Rng rng(12);
  const auto p = testutil::random_dense(m + 1, rng);
  const auto q = testutil::random_dense(m + 1, rng);
  std::uint64_t prev = ~std::uint64_t{0};
  for (int k = 1; k <= 3; ++k) {
    SmoothTrace tr;
    const auto r = smooth_protocol(p, q, f, config(0.002, 7), k, &tr);
    CHECK(*r.abs_error <= 0.002);
    CHECK(r.ledger.total_bits() < prev);
    prev = r.ledger.total_bits();
  }

  auto spec = smooth_catalog("sin_sum");
  spec.analytic = false;
  const auto g = make_smooth_grid(spec, m);
  CHECK(std::abs(smooth_protocol(p, q, g, config(0.01, 7), 2).estimate - *smooth_protocol(p, q, f, config(0.01, 7), 2).truth) <= 0.01);
}
