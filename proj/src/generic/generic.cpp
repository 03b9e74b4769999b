#include "estcomm/generic.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "estcomm/errors.hpp"

namespace estcomm {

namespace {

void check_dims(const ProbVec& p, const ProbVec& q, const TargetFn& f) {
  if (p.domain_size() != f.rows() || q.domain_size() != f.cols()) {
    throw DimensionError("inputs of size " + std::to_string(p.domain_size()) + " and " +
                         std::to_string(q.domain_size()) + " do not fit a " + std::to_string(f.rows()) + "x" +
                         std::to_string(f.cols()) + " function");
  }
}

double row_mean(const ProbVec& q, const TargetFn& f, std::size_t x) {
  double s = 0.0;
  for (const auto& b : q.support()) s += b.value * f(x, b.index);
  return s;
}

double col_mean(const ProbVec& p, const TargetFn& f, std::size_t y) {
  double s = 0.0;
  for (const auto& a : p.support()) s += a.value * f(a.index, y);
  return s;
}

double sampled_row_mean(const ProbVec& q, const TargetFn& f, std::size_t x, std::size_t s, Rng& rng) {
  double t = 0.0;
  for (std::size_t i = 0; i < s; ++i) t += f(x, q.sample(rng));
  return t / static_cast<double>(s);
}

double sampled_col_mean(const ProbVec& p, const TargetFn& f, std::size_t y, std::size_t s, Rng& rng) {
  double t = 0.0;
  for (std::size_t i = 0; i < s; ++i) t += f(p.sample(rng), y);
  return t / static_cast<double>(s);
}

EstimateReport finish(EstimateReport r, const ProbVec& p, const ProbVec& q, const TargetFn& f,
                      const ProtocolConfig& cfg) {
  r.seed = cfg.seed;
  r.set_truth(exact_expectation(p, q, f));
  return r;
}

// Both parties draw their k samples from independent children of the seed.
std::vector<std::size_t> draw(const ProbVec& p, std::size_t k, Rng rng) {
  std::vector<std::size_t> out(k);
  for (auto& x : out) x = p.sample(rng);
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> histogram(std::vector<std::size_t> v) {
  std::sort(v.begin(), v.end());
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (auto x : v) {
    if (!out.empty() && out.back().first == x) {
      ++out.back().second;
    } else {
      out.push_back({x, 1});
    }
  }
  return out;
}

EstimateReport sampling_once(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg) {
  const double eps = cfg.epsilon;
  const auto k = static_cast<std::size_t>(std::ceil(cfg.constant("sampling_k", 4.0) / (eps * eps)));
  Rng root(cfg.seed);
  const auto xs = draw(p, k, root.split(1));
  const auto ys = draw(q, k, root.split(2));

  EstimateReport r;
  double sum = 0.0;
  if (f.family() == Family::DOUBLE_INDEX) {
    // Exchange the indices, then the two addressed bits.
    const std::size_t kb = f.di_bits();
    r.ledger.send(Party::Alice, k * kb, "sample/alice_index");
    r.ledger.send(Party::Bob, k * (kb + 1), "sample/bob_index_and_bit");
    for (std::size_t i = 0; i < k; ++i) sum += f(xs[i], ys[i]);
  } else {
    r.ledger.send(Party::Alice, k * index_bits(f.rows()), "sample/x");
    std::uint64_t bits = 0;
    for (std::size_t i = 0; i < k; ++i) {
      const auto v = quantize(f(xs[i], ys[i]), eps);
      bits += v.bits;
      sum += v.decoded;
    }
    r.ledger.send(Party::Bob, bits, "sample/value");
  }
  r.estimate = sum / static_cast<double>(k);
  return r;
}

}  // namespace

EstimateReport random_sampling_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f,
                                        const ProtocolConfig& cfg) {
  cfg.validate();
  check_dims(p, q, f);
  auto r = amplify(cfg, kBaseFailure, [&](const ProtocolConfig& c) { return sampling_once(p, q, f, c); });
  return finish(std::move(r), p, q, f, cfg);
}

double g_value(const ProbVec& p, const ProbVec& q, const TargetFn& f, std::size_t x, std::size_t y) {
  return col_mean(p, f, y) + row_mean(q, f, x) - f(x, y);
}

std::size_t hoeffding_samples(double t, double fail) {
  if (!(t > 0.0) || !(fail > 0.0 && fail < 1.0)) throw ValidationError("bad Hoeffding parameters");
  return static_cast<std::size_t>(std::ceil(2.0 * std::log(2.0 / fail) / (t * t)));
}

GEstimate estimate_g_two_round(const ProbVec& p, const ProbVec& q, const TargetFn& f, std::size_t x,
                               std::size_t y, double budget, AccessMode access, Rng& rng, double fail) {
  if (!(budget > 0.0)) throw ValidationError("g budget must be positive");
  GEstimate out{0.0, {}};
  out.ledger.send(Party::Bob, index_bits(f.cols()), "g/y");
  if (access == AccessMode::FullDistribution) {
    const auto a = quantize(col_mean(p, f, y), std::min(2.0, 2.0 * budget));
    out.ledger.send(Party::Alice, index_bits(f.rows()) + a.bits, "g/x_and_mean");
    out.value = a.decoded + row_mean(q, f, x) - f(x, y);
    return out;
  }
  const double t = budget / 3.0;
  const std::size_t s = hoeffding_samples(t, fail / 2.0);
  Rng ra = rng.split(1), rb = rng.split(2);
  const auto a = quantize(std::clamp(sampled_col_mean(p, f, y, s, ra), -1.0, 1.0), std::min(2.0, 2.0 * t));
  out.ledger.send(Party::Alice, index_bits(f.rows()) + a.bits, "g/x_and_mean");
  out.value = a.decoded + sampled_row_mean(q, f, x, s, rb) - f(x, y);
  return out;
}

DebiasPlan debias_plan(const ProtocolConfig& cfg) {
  DebiasPlan plan{};
  plan.k_outer = static_cast<std::size_t>(std::ceil(cfg.constant("debias_k", 40.0) / cfg.epsilon));
  plan.g_precision = cfg.epsilon / 10.0;
  if (cfg.access == AccessMode::SampleOnly) {
    // Each of the 2k conditional means gets a third of the per-pair budget.
    plan.inner_sample_count = hoeffding_samples(plan.g_precision / 3.0, 0.01 / (2.0 * plan.k_outer));
  }
  return plan;
}

DebiasResult debiasing_run(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg) {
  cfg.validate();
  check_dims(p, q, f);
  const DebiasPlan plan = debias_plan(cfg);
  const std::size_t k = plan.k_outer;
  Rng root(cfg.seed);
  const auto xs = draw(p, k, root.split(1));
  const auto ys = draw(q, k, root.split(2));
  const bool sampled = cfg.access == AccessMode::SampleOnly;
  Rng ra = root.split(3), rb = root.split(4);

  DebiasResult out{};
  out.k = k;
  auto& ledger = out.report.ledger;
  ledger.send(Party::Bob, k * index_bits(f.cols()), "debias/y");

  // Alice: column means E_{a~p} f(a, y_j), quantized; repeated samples share the work.
  const auto xh = histogram(xs), yh = histogram(ys);
  const double eta = std::min(2.0, 2.0 * (sampled ? plan.g_precision / 3.0 : plan.g_precision));
  double col_sum = 0.0, col_exact = 0.0;
  std::uint64_t bits = 0;
  for (const auto& [y, cy] : yh) {
    const double exact = col_mean(p, f, y);
    col_exact += static_cast<double>(cy) * exact;
    if (sampled) {
      for (std::size_t c = 0; c < cy; ++c) {
        const auto qv = quantize(std::clamp(sampled_col_mean(p, f, y, plan.inner_sample_count, ra), -1.0, 1.0), eta);
        bits += qv.bits;
        col_sum += qv.decoded;
      }
    } else {
      const auto qv = quantize(std::clamp(exact, -1.0, 1.0), eta);
      bits += cy * qv.bits;
      col_sum += static_cast<double>(cy) * qv.decoded;
    }
  }
  ledger.send(Party::Alice, k * index_bits(f.rows()) + bits, "debias/x_and_means");

  // Bob: row means and the k x k block of f.
  double row_sum = 0.0, row_exact = 0.0, f_sum = 0.0;
  for (const auto& [x, cx] : xh) {
    const double exact = row_mean(q, f, x);
    if (sampled) {
      for (std::size_t c = 0; c < cx; ++c) row_sum += sampled_row_mean(q, f, x, plan.inner_sample_count, rb);
    } else {
      row_sum += static_cast<double>(cx) * exact;
    }
    row_exact += static_cast<double>(cx) * exact;
    double line = 0.0;
    for (const auto& [y, cy] : yh) line += static_cast<double>(cy) * f(x, y);
    f_sum += static_cast<double>(cx) * line;
  }
  const double kd = static_cast<double>(k);
  out.report.estimate = col_sum / kd + row_sum / kd - f_sum / (kd * kd);
  out.z = col_exact / kd + row_exact / kd - f_sum / (kd * kd);
  out.report = finish(std::move(out.report), p, q, f, cfg);
  return out;
}

EstimateReport debiasing_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg) {
  cfg.validate();
  check_dims(p, q, f);
  auto r = amplify(cfg, kBaseFailure, [&](const ProtocolConfig& c) { return debiasing_run(p, q, f, c).report; });
  return finish(std::move(r), p, q, f, cfg);
}

double truncation_error(const TargetFn& f, std::size_t r) {
  const auto& s = f.svd();
  r = std::min(r, s.rank());
  const Eigen::MatrixXd a = f.dense();
  if (r == 0) return a.cwiseAbs().maxCoeff();
  const Eigen::MatrixXd approx = s.U.leftCols(r) * s.sigma.head(r).asDiagonal() * s.V.leftCols(r).transpose();
  return (a - approx).cwiseAbs().maxCoeff();
}

EstimateReport svd_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                            std::size_t r) {
  cfg.validate();
  check_dims(p, q, f);
  if (r == 0) throw ValidationError("svd protocol needs r >= 1");
  const auto& s = f.svd();
  r = std::min(r, s.rank());
  const double eps = cfg.epsilon;
  const double approx = truncation_error(f, r);
  if (approx > eps / 2.0) {
    throw ApproximationError("rank-" + std::to_string(r) + " truncation has entrywise error " +
                                 std::to_string(approx) + " > eps/2 = " + std::to_string(eps / 2.0),
                             approx);
  }
  const std::uint64_t n = index_bits(std::max(f.rows(), f.cols()));
  const double half = (eps - approx) / std::ldexp(1.0, static_cast<int>(n));
  const double eta = std::min(2.0, 2.0 * half);

  EstimateReport rep;
  std::uint64_t bits = 0;
  double est = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double alpha = 0.0;
    for (const auto& e : p.support()) alpha += e.value * s.U(static_cast<Eigen::Index>(e.index), static_cast<Eigen::Index>(i));
    double beta = 0.0;
    for (const auto& e : q.support()) beta += e.value * s.V(static_cast<Eigen::Index>(e.index), static_cast<Eigen::Index>(i));
    const auto qa = quantize(std::clamp(alpha, -1.0, 1.0), eta);
    bits += qa.bits;
    est += s.sigma(static_cast<Eigen::Index>(i)) * qa.decoded * beta;
  }
  rep.ledger.send(Party::Alice, bits, "svd/projections");
  rep.estimate = est;
  return finish(std::move(rep), p, q, f, cfg);
}

SketchResult real_ip_sketch(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double delta_err, Rng& rng,
                            double k_factor) {
  if (a.size() == 0 || b.size() == 0) throw ValidationError("inner product of empty vectors");
  if (a.size() != b.size()) throw DimensionError("inner product of vectors of different length");
  if (!(delta_err > 0.0)) throw ValidationError("sketch error must be positive");
  SketchResult out{0.0, {}, 0};
  if (delta_err >= 1.0) return out;  // 0 is already within |a||b|

  const auto norm = quantize_float32(a.norm());
  out.ledger.send(Party::Alice, norm.bits, "sketch/norm");
  if (norm.decoded == 0.0) return out;

  const auto k = static_cast<std::size_t>(std::ceil(k_factor / (delta_err * delta_err)));
  const Eigen::Index dim = a.size();
  const double range = std::sqrt(static_cast<double>(dim));
  const double eta = delta_err / 2.0;
  const double inv = 1.0 / a.norm();
  SignStream signs(rng);
  std::uint64_t bits = 0;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    double pa = 0.0, pb = 0.0;
    for (Eigen::Index j = 0; j < dim; ++j) {
      const double s = signs.next();
      pa += s * a(j);
      pb += s * b(j);
    }
    const auto qa = quantize_range(std::clamp(pa * inv, -range, range), -range, range, eta);
    bits += qa.bits;
    acc += qa.decoded * pb;
  }
  out.ledger.send(Party::Alice, bits, "sketch/projections");
  out.estimate = norm.decoded * acc / static_cast<double>(k);
  out.k = k;
  return out;
}

namespace {

struct HeavySplit {
  std::vector<Entry> heavy;
  std::vector<Entry> light;
};

HeavySplit split_heavy(const ProbVec& p, double beta) {
  HeavySplit s;
  for (const auto& e : p.support()) (e.value >= beta ? s.heavy : s.light).push_back(e);
  return s;
}

// Quantized heavy entries: index plus value in [0,1].
std::vector<Entry> send_heavy(const std::vector<Entry>& heavy, std::size_t domain, double half, Party who,
                              CostLedger& ledger, const char* label) {
  std::vector<Entry> out;
  std::uint64_t bits = 0;
  const double eta = std::min(1.0, 2.0 * half);
  for (const auto& e : heavy) {
    const auto v = quantize_range(e.value, 0.0, 1.0, eta);
    bits += index_bits(domain) + v.bits;
    out.push_back({e.index, v.decoded});
  }
  ledger.send(who, bits + index_bits(domain + 1), label);  // count prefix
  return out;
}

Eigen::VectorXd project(const std::vector<Entry>& v, const Eigen::MatrixXd& basis, std::size_t from,
                        std::size_t to) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(to - from));
  for (const auto& e : v) {
    out += e.value * basis.row(static_cast<Eigen::Index>(e.index))
                         .segment(static_cast<Eigen::Index>(from), static_cast<Eigen::Index>(to - from))
                         .transpose();
  }
  return out;
}

EstimateReport spectral_once(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                             std::size_t t, SpectralTrace* trace) {
  const auto& s = f.svd();
  const std::size_t rank = s.rank();
  const double eps = cfg.epsilon;
  const double sigma1 = rank ? s.sigma(0) : 0.0;
  SpectralTrace tr;
  tr.plan.t_cut = t;
  EstimateReport rep;
  Rng rng(cfg.seed);

  if (rank == 0) {
    rep.estimate = 0.0;
  } else if (t == rank) {
    // Everything is exact: Alice sends u_j^T p for all j.
    tr.plan.beta = 1.0;
    const double eta = std::min(2.0, 2.0 * eps / (sigma1 * std::sqrt(static_cast<double>(t))));
    std::uint64_t bits = 0;
    double est = 0.0;
    std::vector<Entry> pe(p.support().begin(), p.support().end());
    std::vector<Entry> qe(q.support().begin(), q.support().end());
    const Eigen::VectorXd alpha = project(pe, s.U, 0, t);
    const Eigen::VectorXd gamma = project(qe, s.V, 0, t);
    for (std::size_t j = 0; j < t; ++j) {
      const auto qa = quantize(std::clamp(alpha(static_cast<Eigen::Index>(j)), -1.0, 1.0), eta);
      bits += qa.bits;
      est += s.sigma(static_cast<Eigen::Index>(j)) * qa.decoded * gamma(static_cast<Eigen::Index>(j));
    }
    rep.ledger.send(Party::Alice, bits, "exact/projections");
    rep.estimate = est;
    tr.exact_error_bound = eps;
  } else {
    const double sigma_tail = s.sigma(static_cast<Eigen::Index>(t));
    const double heavy_budget = eps / 2.0;
    const double exact_budget = t == 0 ? 0.0 : eps / 4.0;
    const double sketch_budget = eps - heavy_budget - exact_budget;
    const double c = cfg.constant("spectral_beta_c", 1.0);
    const double beta = std::min(1.0, c * std::pow(eps / sigma_tail, 2.0 / 3.0));
    tr.plan.beta = beta;

    auto ps = split_heavy(p, beta);
    auto qs = split_heavy(q, beta);
    tr.heavy_alice = ps.heavy.size();
    tr.heavy_bob = qs.heavy.size();
    const double h = heavy_budget * beta / 8.0;

    // Round 1, Bob: heavy part of q.
    const auto qh = send_heavy(qs.heavy, f.cols(), h, Party::Bob, rep.ledger, "heavy/bob");
    // Round 2, Alice: heavy part of p and (p^l)^T A q~^h.
    const auto ph = send_heavy(ps.heavy, f.rows(), h, Party::Alice, rep.ledger, "heavy/alice");
    double cross = 0.0;
    for (const auto& a : ps.light)
      for (const auto& b : qh) cross += a.value * b.value * f(a.index, b.index);
    const auto qc = quantize(std::clamp(cross, -1.0, 1.0), heavy_budget / 2.0);
    rep.ledger.send(Party::Alice, qc.bits, "heavy/cross_term");
    double heavy_term = qc.decoded;
    for (const auto& a : ph) heavy_term += a.value * row_mean(q, f, a.index);
    // 2h/beta from the two rounded heavy vectors plus the rounded cross term.
    tr.heavy_error_bound = 2.0 * h * (1.0 / beta) + heavy_budget / 4.0;

    double exact_term = 0.0;
    if (t > 0) {
      const Eigen::VectorXd alpha = project(ps.light, s.U, 0, t);
      const Eigen::VectorXd gamma = project(qs.light, s.V, 0, t);
      const double eta = std::min(2.0, 2.0 * exact_budget / (sigma1 * std::sqrt(static_cast<double>(t))));
      std::uint64_t bits = 0;
      for (std::size_t j = 0; j < t; ++j) {
        const auto qa = quantize(std::clamp(alpha(static_cast<Eigen::Index>(j)), -1.0, 1.0), eta);
        bits += qa.bits;
        exact_term += s.sigma(static_cast<Eigen::Index>(j)) * qa.decoded * gamma(static_cast<Eigen::Index>(j));
      }
      rep.ledger.send(Party::Alice, bits, "exact/projections");
      tr.exact_error_bound = exact_budget;
    }

    const double delta = sketch_budget / (sigma_tail * beta);
    tr.plan.sketch_delta = delta;
    Eigen::VectorXd a = project(ps.light, s.U, t, rank);
    Eigen::VectorXd b = project(qs.light, s.V, t, rank);
    const Eigen::VectorXd root = s.sigma.segment(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(rank - t)).cwiseSqrt();
    a = a.cwiseProduct(root);
    b = b.cwiseProduct(root);
    Rng sketch_rng = rng.split(7);
    auto sk = real_ip_sketch(a, b, delta, sketch_rng, cfg.constant("sketch_k", 100.0));
    tr.plan.sketch_dim = sk.k;
    tr.sketch_error_bound = delta * sigma_tail * beta;
    rep.ledger.absorb(sk.ledger);
    rep.estimate = heavy_term + exact_term + sk.estimate;
  }
  if (trace) *trace = tr;
  return rep;
}

}  // namespace

EstimateReport spectral_hybrid_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f,
                                        const ProtocolConfig& cfg, std::size_t t, SpectralTrace* trace) {
  cfg.validate();
  check_dims(p, q, f);
  const auto& s = f.svd();
  if (t > s.rank()) {
    throw ValidationError("t = " + std::to_string(t) + " exceeds rank " + std::to_string(s.rank()));
  }
  auto r = amplify(cfg, kBaseFailure, [&](const ProtocolConfig& c) { return spectral_once(p, q, f, c, t, trace); });
  return finish(std::move(r), p, q, f, cfg);
}

EstimateReport spectral_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                                 SpectralTrace* trace) {
  return spectral_hybrid_protocol(p, q, f, cfg, 0, trace);
}

double signed_error_bound(double eps, const SignedVec& pt, const SignedVec& qt) {
  const double a = pt.l1(), b = qt.l1();
  return eps * (a * b + a + b);
}

EstimateReport signed_extension(const Protocol& protocol, const SignedVec& pt, const SignedVec& qt,
                                const TargetFn& f, const ProtocolConfig& cfg) {
  cfg.validate();
  if (pt.domain_size() != f.rows() || qt.domain_size() != f.cols()) {
    throw DimensionError("signed inputs do not fit the function");
  }
  if (pt.l1() == 0.0 || qt.l1() == 0.0) throw ValidationError("signed extension of a zero vector");
  const double bound = cfg.constant("signed_norm_bound", 16.0);
  const double eps = cfg.epsilon;

  const SignedVec p_parts[2] = {pt.positive_part(), pt.negative_part()};
  const SignedVec q_parts[2] = {qt.positive_part(), qt.negative_part()};
  CostLedger norms;
  double p_norm[2];
  std::uint64_t bits = 0;
  for (int s = 0; s < 2; ++s) {
    const double l1 = p_parts[s].l1();
    if (l1 > bound) throw ValidationError("signed input norm exceeds the configured bound");
    const auto v = quantize_range(l1, 0.0, bound, eps);
    bits += v.bits;
    p_norm[s] = l1 == 0.0 ? 0.0 : v.decoded;
  }
  norms.send(Party::Alice, bits, "signed/norms");

  std::vector<CostLedger> ledgers{norms};
  double est = 0.0;
  Rng root(cfg.seed);
  const char* names[2] = {"p", "n"};
  for (int s = 0; s < 2; ++s) {
    if (p_parts[s].l1() == 0.0) continue;
    for (int t = 0; t < 2; ++t) {
      const double qn = q_parts[t].l1();
      if (qn == 0.0) continue;
      const ProtocolConfig sub = (s == 0 && t == 0) ? cfg : cfg.with_seed(root.split(2 * s + t).next());
      auto rep = protocol(p_parts[s].normalized(), q_parts[t].normalized(), f, sub);
      const double sign = (s == t) ? 1.0 : -1.0;
      est += sign * p_norm[s] * qn * rep.estimate;
      CostLedger tagged;
      tagged.absorb(rep.ledger, std::string(names[s]) + names[t] + "/");
      ledgers.push_back(std::move(tagged));
    }
  }
  EstimateReport out;
  out.estimate = est;
  out.ledger = CostLedger::parallel(ledgers);
  out.seed = cfg.seed;
  out.set_truth(exact_bilinear(pt, qt, f));
  return out;
}

}  // namespace estcomm
