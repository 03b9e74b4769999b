#include <algorithm>
#include <cmath>
#include <string>

#include "estcomm/errors.hpp"
#include "estcomm/generic.hpp"
#include "estcomm/specific.hpp"

namespace estcomm {

namespace {

SignedVec truncate_entries(std::size_t domain, std::span<const Entry> entries, double eps) {
  if (!(eps > 0.0 && eps < 1.0)) throw ValidationError("truncation threshold must lie in (0,1)");
  std::vector<Entry> out;
  for (const auto& e : entries) {
    if (e.value >= eps) out.push_back(e);
  }
  return SignedVec(domain, std::move(out));
}

// Push a sparse vector through the hash; result is sorted by bucket.
std::vector<Entry> hashed(const SignedVec& v, std::uint64_t key, std::size_t m) {
  std::vector<Entry> out;
  out.reserve(v.entries().size());
  for (const auto& e : v.entries()) out.push_back({hash_bucket(key, e.index, m), e.value});
  const SignedVec merged(m, std::move(out));
  return {merged.entries().begin(), merged.entries().end()};
}

double lookup(const std::vector<Entry>& v, std::size_t i) {
  auto it = std::lower_bound(v.begin(), v.end(), i, [](const Entry& e, std::size_t x) { return e.index < x; });
  return (it != v.end() && it->index == i) ? it->value : 0.0;
}

EstimateReport eq_once(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg) {
  const EqPlan plan = eq_plan(cfg);
  const double e = plan.eps_internal;
  const std::size_t m = plan.buckets;
  const std::uint64_t mb = index_bits(m);
  Rng root(cfg.seed);
  const std::uint64_t key = root.split(11).key();

  const auto ph = hashed(heavy_truncate(p, e), key, m);
  const auto qh = hashed(heavy_truncate(q, e), key, m);

  EstimateReport r;
  // Alice: beta-heavy buckets of p' with their masses.
  std::vector<Entry> heavy;
  std::uint64_t bits = index_bits(static_cast<std::uint64_t>(std::floor(1.0 / plan.beta)) + 1);
  for (const auto& b : ph) {
    if (b.value < plan.beta) continue;
    const auto v = quantize_range(b.value, 0.0, 1.0, e);
    heavy.push_back({b.index, v.decoded});
    bits += mb + v.bits;
  }
  r.ledger.send(Party::Alice, bits, "eq/heavy");

  // Bob: heavy part of the sum, |q'|_1, and t samples from q' / |q'|_1.
  double heavy_sum = 0.0;
  for (const auto& h : heavy) heavy_sum += h.value * lookup(qh, h.index);
  const auto hs = quantize_range(std::min(heavy_sum, 1.0), 0.0, 1.0, e);
  double norm = 0.0;
  for (const auto& b : qh) norm += b.value;
  const auto nq = quantize_range(std::min(norm, 1.0), 0.0, 1.0, 2.0 * e);
  std::uint64_t bob_bits = hs.bits + nq.bits;
  double light = 0.0;
  if (!qh.empty()) {
    const ProbVec qn = SignedVec(m, qh).normalized();
    Rng rb = root.split(12);
    for (std::size_t i = 0; i < plan.samples; ++i) {
      const double v = lookup(ph, qn.sample(rb));
      if (v < plan.beta) light += v;
    }
    bob_bits += plan.samples * mb;
    light = nq.decoded * light / static_cast<double>(plan.samples);
  }
  r.ledger.send(Party::Bob, bob_bits, "eq/norm_and_samples");
  r.estimate = hs.decoded + light;
  return r;
}

}  // namespace

SignedVec heavy_truncate(const ProbVec& p, double eps) {
  return truncate_entries(p.domain_size(), p.support(), eps);
}

SignedVec heavy_truncate(const SignedVec& p, double eps) {
  return truncate_entries(p.domain_size(), p.entries(), eps);
}

std::size_t hash_bucket(std::uint64_t key, std::size_t x, std::size_t m) {
  const std::uint64_t h = Rng::mix(key ^ Rng::mix(static_cast<std::uint64_t>(x) + 0x9e3779b97f4a7c15ULL));
  return static_cast<std::size_t>((static_cast<unsigned __int128>(h) * m) >> 64);
}

EqPlan eq_plan(const ProtocolConfig& cfg) {
  EqPlan plan{};
  plan.eps_internal = cfg.epsilon / 6.0;
  const double e = plan.eps_internal;
  plan.buckets = static_cast<std::size_t>(std::ceil(cfg.constant("eq_buckets", 40.0) / (e * e)));
  plan.beta = std::min(1.0, std::pow(e, 2.0 / 3.0));
  // Chebyshev at failure 0.05 for a [0, beta) statistic: error <= 2e.
  plan.samples = static_cast<std::size_t>(std::ceil(cfg.constant("eq_t", 1.25) * plan.beta * plan.beta / (e * e)));
  return plan;
}

EstimateReport eq_protocol(const ProbVec& p, const ProbVec& q, const ProtocolConfig& cfg) {
  cfg.validate();
  if (p.domain_size() != q.domain_size()) throw DimensionError("equality needs a common domain");
  auto r = amplify(cfg, kBaseFailure, [&](const ProtocolConfig& c) { return eq_once(p, q, c); });
  r.seed = cfg.seed;
  r.set_truth(SignedVec::from_prob(p).dot(SignedVec::from_prob(q)));
  return r;
}

EstimateReport sparse_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                               std::optional<std::size_t> s) {
  cfg.validate();
  if (p.domain_size() != f.rows() || q.domain_size() != f.cols()) {
    throw DimensionError("inputs do not fit the function");
  }
  const std::size_t nz = f.max_row_nonzeros();
  if (s && nz > *s) {
    throw ValidationError("function has a row with " + std::to_string(nz) + " nonzeros, above the sparsity bound " +
                          std::to_string(*s));
  }
  const std::size_t sp = s ? *s : nz;
  const double eps = cfg.epsilon;
  const int levels = static_cast<int>(std::ceil(std::log2(2.0 / eps)));
  const double scale = std::ldexp(1.0, levels);
  const std::size_t cols = f.cols();

  // Alice: nonzeros of each row she can draw, as (column, magnitude code, sign).
  struct Nz {
    std::size_t col;
    std::int64_t code;
    bool negative;
  };
  std::vector<std::vector<Nz>> rows;
  double rounding = 0.0;
  for (const auto& e : p.support()) {
    std::vector<Nz> row;
    for (std::size_t y = 0; y < cols; ++y) {
      const double v = f(e.index, y);
      if (v == 0.0) continue;
      const auto code = static_cast<std::int64_t>(std::llround(std::abs(v) * scale));
      rounding = std::max(rounding, std::abs(static_cast<double>(code) / scale - std::abs(v)));
      row.push_back({y, code, v < 0.0});
    }
    rows.push_back(std::move(row));
  }

  // One 0/1 one-sparse matrix per (slot, sign, bit); keep the nonempty ones.
  struct Piece {
    std::vector<Entry> pushed;
    double weight;
  };
  std::vector<Piece> pieces;
  double total_weight = 0.0;
  for (std::size_t slot = 0; slot < sp; ++slot) {
    for (int sign = 0; sign < 2; ++sign) {
      for (int b = 0; b <= levels; ++b) {
        std::vector<Entry> pushed;
        bool any = false;
        for (std::size_t i = 0; i < rows.size(); ++i) {
          const auto x = p.support()[i];
          std::size_t target = cols;
          if (slot < rows[i].size()) {
            const auto& z = rows[i][slot];
            if (z.negative == (sign == 1) && ((z.code >> b) & 1)) {
              target = z.col;
              any = true;
            }
          }
          pushed.push_back({target, x.value});
        }
        if (!any) continue;
        const double w = std::ldexp(sign == 1 ? -1.0 : 1.0, b - levels);
        total_weight += std::abs(w);
        pieces.push_back({std::move(pushed), w});
      }
    }
  }

  EstimateReport out;
  out.seed = cfg.seed;
  if (!pieces.empty()) {
    std::vector<Entry> qe(q.support().begin(), q.support().end());
    const ProbVec qx = ProbVec::from_sparse(cols + 1, qe);
    const double inner = std::min(0.5, (eps - rounding) / total_weight);
    Rng root(cfg.seed);
    std::vector<CostLedger> ledgers;
    double est = 0.0;
    for (std::size_t j = 0; j < pieces.size(); ++j) {
      ProtocolConfig c = cfg.with_epsilon(inner);
      if (pieces.size() > 1) {
        c = c.with_seed(root.split(100 + j).next());
        c.delta = cfg.delta / static_cast<double>(pieces.size());
      }
      const ProbVec px = ProbVec::from_sparse(cols + 1, pieces[j].pushed);
      const auto r = eq_protocol(px, qx, c);
      est += pieces[j].weight * r.estimate;
      ledgers.push_back(r.ledger);
    }
    out.ledger = CostLedger::parallel(ledgers, "sparse/");
    out.estimate = est;
  }
  out.set_truth(exact_expectation(p, q, f));
  return out;
}

}  // namespace estcomm
