#include "estcomm/prob_vec.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "estcomm/errors.hpp"

namespace estcomm {

namespace {

std::vector<Entry> canonicalize(std::size_t domain_size, std::vector<Entry> entries, bool allow_negative) {
  for (const auto& e : entries) {
    if (e.index >= domain_size) {
      throw ValidationError("index " + std::to_string(e.index) + " outside domain of size " +
                            std::to_string(domain_size));
    }
    if (!std::isfinite(e.value)) throw ValidationError("non-finite vector entry");
    if (!allow_negative && e.value < 0.0) {
      throw ValidationError("negative probability mass at index " + std::to_string(e.index));
    }
  }
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.index < b.index; });
  std::vector<Entry> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    if (!out.empty() && out.back().index == e.index) {
      out.back().value += e.value;
    } else {
      out.push_back(e);
    }
  }
  std::erase_if(out, [](const Entry& e) { return e.value == 0.0; });
  return out;
}

}  // namespace

void ProbVec::build(std::size_t domain_size, std::vector<Entry> entries) {
  if (domain_size == 0) throw ValidationError("distribution over an empty domain");
  support_ = canonicalize(domain_size, std::move(entries), false);
  domain_size_ = domain_size;
  double total = 0.0;
  for (const auto& e : support_) total += e.value;
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw ValidationError("total mass " + std::to_string(total) + " is not 1");
  }
  if (static_cast<double>(support_.size()) >= kDenseThreshold * static_cast<double>(domain_size)) {
    dense_.assign(domain_size, 0.0);
    for (const auto& e : support_) dense_[e.index] = e.value;
  }

  // Vose alias table over support positions.
  const std::size_t s = support_.size();
  alias_prob_.assign(s, 0.0);
  alias_.assign(s, 0);
  std::vector<double> scaled(s);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < s; ++i) {
    scaled[i] = support_[i].value / total * static_cast<double>(s);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto l = small.back();
    small.pop_back();
    const auto g = large.back();
    alias_prob_[l] = scaled[l];
    alias_[l] = g;
    scaled[g] = (scaled[g] + scaled[l]) - 1.0;
    if (scaled[g] < 1.0) {
      large.pop_back();
      small.push_back(g);
    }
  }
  for (auto g : large) alias_prob_[g] = 1.0;
  for (auto l : small) alias_prob_[l] = 1.0;
}

ProbVec ProbVec::from_dense(std::vector<double> mass) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < mass.size(); ++i) {
    if (mass[i] != 0.0) entries.push_back({i, mass[i]});
  }
  ProbVec p;
  p.build(mass.size(), std::move(entries));
  return p;
}

ProbVec ProbVec::from_sparse(std::size_t domain_size, std::vector<Entry> entries) {
  ProbVec p;
  p.build(domain_size, std::move(entries));
  return p;
}

ProbVec ProbVec::point_mass(std::size_t domain_size, std::size_t x) {
  return from_sparse(domain_size, {{x, 1.0}});
}

ProbVec ProbVec::uniform(std::size_t domain_size) { return uniform_prefix(domain_size, domain_size); }

ProbVec ProbVec::uniform_prefix(std::size_t domain_size, std::size_t k) {
  if (k == 0 || k > domain_size) throw ValidationError("uniform prefix size out of range");
  std::vector<Entry> entries(k);
  for (std::size_t i = 0; i < k; ++i) entries[i] = {i, 1.0 / static_cast<double>(k)};
  return from_sparse(domain_size, std::move(entries));
}

ProbVec ProbVec::mixture(const ProbVec& a, const ProbVec& b, double alpha) {
  if (a.domain_size() != b.domain_size()) throw DimensionError("mixture of distributions on different domains");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("mixture weight outside [0,1]");
  std::vector<Entry> entries;
  entries.reserve(a.support_size() + b.support_size());
  for (const auto& e : a.support()) entries.push_back({e.index, alpha * e.value});
  for (const auto& e : b.support()) entries.push_back({e.index, (1.0 - alpha) * e.value});
  return from_sparse(a.domain_size(), std::move(entries));
}

double ProbVec::operator[](std::size_t x) const {
  if (!dense_.empty()) return x < dense_.size() ? dense_[x] : 0.0;
  auto it = std::lower_bound(support_.begin(), support_.end(), x,
                             [](const Entry& e, std::size_t i) { return e.index < i; });
  return (it != support_.end() && it->index == x) ? it->value : 0.0;
}

std::vector<double> ProbVec::to_dense() const {
  if (!dense_.empty()) return dense_;
  std::vector<double> out(domain_size_, 0.0);
  for (const auto& e : support_) out[e.index] = e.value;
  return out;
}

std::size_t ProbVec::sample(Rng& rng) const {
  const std::size_t s = support_.size();
  if (s == 1) return support_[0].index;
  // One draw: high 32 bits pick the column, low 32 bits the coin.
  const std::uint64_t r = rng.next();
  const auto column = static_cast<std::size_t>(((r >> 32) * s) >> 32);
  const double coin = static_cast<double>(r & 0xffffffffULL) * 0x1.0p-32;
  return coin < alias_prob_[column] ? support_[column].index : support_[alias_[column]].index;
}

SignedVec::SignedVec(std::size_t domain_size, std::vector<Entry> entries)
    : domain_size_(domain_size), entries_(canonicalize(domain_size, std::move(entries), true)) {}

SignedVec SignedVec::from_dense(std::span<const double> values) {
  std::vector<Entry> entries;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (values[i] != 0.0) entries.push_back({i, values[i]});
  }
  return SignedVec(values.size(), std::move(entries));
}

SignedVec SignedVec::from_prob(const ProbVec& p) {
  return SignedVec(p.domain_size(), std::vector<Entry>(p.support().begin(), p.support().end()));
}

double SignedVec::operator[](std::size_t x) const {
  auto it = std::lower_bound(entries_.begin(), entries_.end(), x,
                             [](const Entry& e, std::size_t i) { return e.index < i; });
  return (it != entries_.end() && it->index == x) ? it->value : 0.0;
}

double SignedVec::l1() const {
  double s = 0.0;
  for (const auto& e : entries_) s += std::abs(e.value);
  return s;
}

SignedVec SignedVec::positive_part() const {
  std::vector<Entry> out;
  for (const auto& e : entries_) {
    if (e.value > 0.0) out.push_back(e);
  }
  return SignedVec(domain_size_, std::move(out));
}

SignedVec SignedVec::negative_part() const {
  std::vector<Entry> out;
  for (const auto& e : entries_) {
    if (e.value < 0.0) out.push_back({e.index, -e.value});
  }
  return SignedVec(domain_size_, std::move(out));
}

SignedVec SignedVec::negated() const {
  std::vector<Entry> out(entries_);
  for (auto& e : out) e.value = -e.value;
  return SignedVec(domain_size_, std::move(out));
}

double SignedVec::dot(const SignedVec& other) const {
  if (domain_size_ != other.domain_size_) throw DimensionError("dot product of vectors on different domains");
  double s = 0.0;
  auto a = entries_.begin();
  auto b = other.entries_.begin();
  while (a != entries_.end() && b != other.entries_.end()) {
    if (a->index < b->index) {
      ++a;
    } else if (b->index < a->index) {
      ++b;
    } else {
      s += a->value * b->value;
      ++a;
      ++b;
    }
  }
  return s;
}

ProbVec SignedVec::normalized() const {
  const double total = l1();
  if (total <= 0.0) throw ValidationError("cannot normalize a zero vector");
  std::vector<Entry> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) {
    if (e.value < 0.0) throw ValidationError("cannot normalize a vector with negative entries");
    out.push_back({e.index, e.value / total});
  }
  // Absorb rounding so the result passes the 1e-12 mass check.
  double s = 0.0;
  for (const auto& e : out) s += e.value;
  if (!out.empty()) {
    auto heaviest = std::max_element(out.begin(), out.end(), [](const Entry& a, const Entry& b) { return a.value < b.value; });
    heaviest->value += 1.0 - s;
  }
  return ProbVec::from_sparse(domain_size_, std::move(out));
}

}  // namespace estcomm
