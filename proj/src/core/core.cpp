#include "estcomm/core.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "estcomm/errors.hpp"
#include "estcomm/target_fn.hpp"

namespace estcomm {

const char* party_name(Party p) { return p == Party::Alice ? "alice" : "bob"; }

void CostLedger::send(Party speaker, std::uint64_t bits, std::string label) {
  (speaker == Party::Alice ? bits_alice_ : bits_bob_) += bits;
  messages_.push_back({speaker, bits, std::move(label)});
}

void CostLedger::absorb(const CostLedger& other, std::string_view label_prefix) {
  for (const auto& m : other.messages_) send(m.speaker, m.bits, std::string(label_prefix) + m.label);
}

CostLedger CostLedger::parallel(const std::vector<CostLedger>& runs, std::string_view label_prefix) {
  // Split each run into blocks of consecutive same-speaker messages.
  std::vector<std::vector<std::pair<std::size_t, std::size_t>>> blocks(runs.size());
  std::size_t depth = 0;
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& msgs = runs[r].messages_;
    std::size_t start = 0;
    for (std::size_t i = 1; i <= msgs.size(); ++i) {
      if (i == msgs.size() || msgs[i].speaker != msgs[start].speaker) {
        blocks[r].push_back({start, i});
        start = i;
      }
    }
    depth = std::max(depth, blocks[r].size());
  }
  CostLedger out;
  for (std::size_t level = 0; level < depth; ++level) {
    for (Party speaker : {Party::Alice, Party::Bob}) {
      for (std::size_t r = 0; r < runs.size(); ++r) {
        if (level >= blocks[r].size()) continue;
        auto [b, e] = blocks[r][level];
        if (runs[r].messages_[b].speaker != speaker) continue;
        for (std::size_t i = b; i < e; ++i) {
          const auto& m = runs[r].messages_[i];
          out.send(m.speaker, m.bits, std::string(label_prefix) + m.label);
        }
      }
    }
  }
  return out;
}

std::uint64_t CostLedger::rounds() const {
  if (messages_.empty()) return 0;
  std::uint64_t r = 1;
  for (std::size_t i = 1; i < messages_.size(); ++i) {
    if (messages_[i].speaker != messages_[i - 1].speaker) ++r;
  }
  return r;
}

std::uint64_t CostLedger::bits_labeled(std::string_view prefix) const {
  std::uint64_t s = 0;
  for (const auto& m : messages_) {
    if (std::string_view(m.label).substr(0, prefix.size()) == prefix) s += m.bits;
  }
  return s;
}

std::uint64_t index_bits(std::uint64_t n) {
  if (n == 0) throw ValidationError("empty domain");
  return n == 1 ? 0 : static_cast<std::uint64_t>(std::bit_width(n - 1));
}

namespace {

std::uint64_t level_bits(double span, double eta) {
  const double levels = std::ceil(std::log2(span / eta) - 1e-12);
  return static_cast<std::uint64_t>(std::max(0.0, levels)) + 1;
}

}  // namespace

Quantized quantize_range(double value, double lo, double hi, double eta) {
  if (!(eta > 0.0) || !std::isfinite(eta)) throw ValidationError("quantization precision must be positive");
  if (!(hi > lo)) throw ValidationError("empty quantization range");
  if (eta > hi - lo) throw ValidationError("quantization precision wider than the range");
  if (!std::isfinite(value)) throw ValidationError("cannot quantize a non-finite value");
  const double slack = 1e-9 * (hi - lo);
  if (value < lo - slack || value > hi + slack) {
    throw ValidationError("value " + std::to_string(value) + " outside quantization range");
  }
  value = std::clamp(value, lo, hi);
  const std::uint64_t bits = level_bits(hi - lo, eta);
  const double top = bits >= 62 ? 0x1.0p62 : std::ldexp(1.0, static_cast<int>(bits)) - 1.0;
  const double code = std::clamp(std::round((value - lo) / eta), 0.0, top);
  return {static_cast<std::int64_t>(code), bits, lo + code * eta};
}

Quantized quantize(double value, double eta) {
  if (!(eta > 0.0)) throw ValidationError("quantization precision must be positive");
  if (eta > 2.0) throw ValidationError("quantization precision above 2");
  return quantize_range(value, -1.0, 1.0, eta);
}

double dequantize(std::int64_t code, double eta) { return -1.0 + static_cast<double>(code) * eta; }

Quantized quantize_float32(double value) {
  const auto f = static_cast<float>(value);
  return {0, 32, static_cast<double>(f)};
}

void ProtocolConfig::validate() const {
  if (!(epsilon > 0.0 && epsilon < 1.0)) {
    throw ValidationError("epsilon must lie in (0,1), got " + std::to_string(epsilon));
  }
  if (!(delta > 0.0 && delta < 0.5)) {
    throw ValidationError("delta must lie in (0,1/2), got " + std::to_string(delta));
  }
}

double ProtocolConfig::constant(const std::string& name, double fallback) const {
  auto it = constants.find(name);
  return it == constants.end() ? fallback : it->second;
}

ProtocolConfig ProtocolConfig::with_epsilon(double eps) const {
  ProtocolConfig c = *this;
  c.epsilon = eps;
  return c;
}

ProtocolConfig ProtocolConfig::with_seed(std::uint64_t s) const {
  ProtocolConfig c = *this;
  c.seed = s;
  return c;
}

void EstimateReport::set_truth(double t) {
  truth = t;
  abs_error = std::abs(estimate - t);
}

double exact_expectation(const ProbVec& p, const ProbVec& q, const TargetFn& f) {
  if (p.domain_size() != f.rows() || q.domain_size() != f.cols()) {
    throw DimensionError("distribution sizes " + std::to_string(p.domain_size()) + "x" +
                         std::to_string(q.domain_size()) + " do not match function " +
                         std::to_string(f.rows()) + "x" + std::to_string(f.cols()));
  }
  double total = 0.0;
  for (const auto& a : p.support()) {
    double row = 0.0;
    for (const auto& b : q.support()) row += b.value * f(a.index, b.index);
    total += a.value * row;
  }
  return total;
}

double exact_bilinear(const SignedVec& a, const SignedVec& b, const TargetFn& f) {
  if (a.domain_size() != f.rows() || b.domain_size() != f.cols()) {
    throw DimensionError("vector sizes do not match function");
  }
  double total = 0.0;
  for (const auto& x : a.entries()) {
    double row = 0.0;
    for (const auto& y : b.entries()) row += y.value * f(x.index, y.index);
    total += x.value * row;
  }
  return total;
}

std::size_t amplification_runs(double delta, double base) {
  if (delta >= base) return 1;
  // Hoeffding: the median fails only if half the runs fail.
  const double gap = 0.5 - base;
  auto r = static_cast<std::size_t>(std::ceil(std::log(1.0 / delta) / (2.0 * gap * gap)));
  if (r % 2 == 0) ++r;
  return std::max<std::size_t>(r, 1);
}

EstimateReport amplify(const ProtocolConfig& cfg, double base_delta,
                       const std::function<EstimateReport(const ProtocolConfig&)>& once) {
  const std::size_t runs = amplification_runs(cfg.delta, base_delta);
  if (runs == 1) return once(cfg);
  std::vector<EstimateReport> reports;
  std::vector<CostLedger> ledgers;
  Rng root(cfg.seed);
  for (std::size_t i = 0; i < runs; ++i) {
    ProtocolConfig c = cfg.with_seed(root.split(i).next());
    c.delta = base_delta;
    reports.push_back(once(c));
    ledgers.push_back(reports.back().ledger);
  }
  std::vector<double> est;
  for (const auto& r : reports) est.push_back(r.estimate);
  std::nth_element(est.begin(), est.begin() + runs / 2, est.end());
  EstimateReport out;
  out.estimate = est[runs / 2];
  out.ledger = CostLedger::parallel(ledgers, "rep/");
  out.seed = cfg.seed;
  if (reports.front().truth) out.set_truth(*reports.front().truth);
  return out;
}

}  // namespace estcomm
