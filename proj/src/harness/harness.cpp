#include "estcomm/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <istream>
#include <mutex>
#include <sstream>
#include <thread>

#include "estcomm/errors.hpp"
#include "estcomm/generic.hpp"
#include "estcomm/specific.hpp"

namespace estcomm {

namespace {

const std::vector<std::pair<std::string, InstanceKind>>& instance_table() {
  static const std::vector<std::pair<std::string, InstanceKind>> t{
      {"point_mass", InstanceKind::PointMass},
      {"uniform", InstanceKind::Uniform},
      {"random_sparse", InstanceKind::RandomSparse},
      {"random_dense", InstanceKind::RandomDense},
      {"adversarial_atom", InstanceKind::AdversarialAtom},
  };
  return t;
}

std::vector<Entry> sparse_entries(std::size_t n, std::size_t s, Rng& rng) {
  // Supports come from a shared pool of 4s evenly spaced points so two
  // independent draws overlap.
  s = std::min(s, n);
  const std::size_t pool = std::min(n, 4 * s);
  const std::size_t stride = n / pool;
  std::vector<std::size_t> slots(pool);
  for (std::size_t i = 0; i < pool; ++i) slots[i] = i;
  for (std::size_t i = 0; i < s; ++i) std::swap(slots[i], slots[i + rng.below(pool - i)]);
  std::vector<Entry> out;
  for (std::size_t i = 0; i < s; ++i) out.push_back({slots[i] * stride, -std::log(1.0 - rng.uniform()) + 1e-3});
  return out;
}

ProbVec normalized(std::size_t n, std::vector<Entry> e) { return SignedVec(n, std::move(e)).normalized(); }

ProbVec draw_instance(InstanceKind kind, std::size_t n, std::size_t support, Rng& rng) {
  switch (kind) {
    case InstanceKind::PointMass:
      return ProbVec::point_mass(n, rng.below(n));
    case InstanceKind::Uniform:
      return ProbVec::uniform(n);
    case InstanceKind::RandomSparse:
      return normalized(n, sparse_entries(n, support, rng));
    case InstanceKind::RandomDense: {
      if (n > (std::size_t{1} << 20)) throw ValidationError("random_dense instances are limited to 2^20 points");
      std::vector<Entry> e(n);
      for (std::size_t i = 0; i < n; ++i) e[i] = {i, -std::log(1.0 - rng.uniform())};
      return normalized(n, std::move(e));
    }
    case InstanceKind::AdversarialAtom: {
      auto e = sparse_entries(n, support, rng);
      double s = 0.0;
      for (const auto& x : e) s += x.value;
      for (auto& x : e) x.value *= 0.5 / s;
      e.push_back({rng.below(n), 0.5});
      return normalized(n, std::move(e));
    }
  }
  throw ValidationError("unknown instance kind");
}

struct Outcome {
  EstimateReport report;
  std::optional<double> z;
};

EstimateReport powerlaw_stub(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg) {
  EstimateReport r;
  const double a = cfg.constant("powerlaw_exponent", 1.5);
  const double c = cfg.constant("powerlaw_scale", 100.0);
  r.ledger.send(Party::Alice, static_cast<std::uint64_t>(std::llround(c * std::pow(cfg.epsilon, -a))), "stub/bits");
  r.estimate = exact_expectation(p, q, f);
  return r;
}

Outcome dispatch(const std::string& id, const ProbVec& p, const ProbVec& q, const TargetFn& f,
                 const ProtocolConfig& cfg) {
  if (id == "sampling") return {random_sampling_protocol(p, q, f, cfg), {}};
  if (id == "debias") {
    if (amplification_runs(cfg.delta, kBaseFailure) == 1) {
      auto d = debiasing_run(p, q, f, cfg);
      return {std::move(d.report), d.z};
    }
    return {debiasing_protocol(p, q, f, cfg), {}};
  }
  if (id == "svd") {
    const double r = cfg.constant("svd_rank", static_cast<double>(f.svd().rank()));
    return {svd_protocol(p, q, f, cfg, static_cast<std::size_t>(r)), {}};
  }
  if (id == "spectral") return {spectral_protocol(p, q, f, cfg), {}};
  if (id == "hybrid") {
    return {spectral_hybrid_protocol(p, q, f, cfg, static_cast<std::size_t>(cfg.constant("hybrid_t", 1.0))), {}};
  }
  if (id == "eq") return {eq_protocol(p, q, cfg), {}};
  if (id == "sparse") return {sparse_protocol(p, q, f, cfg), {}};
  if (id == "gt") return {gt_protocol(p, q, cfg), {}};
  if (id == "toeplitz") return {toeplitz_protocol(p, q, f, cfg), {}};
  if (id == "abs") return {abs_protocol(p, q, cfg), {}};
  if (id == "convex") return {convex_lipschitz_protocol(p, q, f, cfg), {}};
  if (id == "smooth") {
    return {smooth_protocol(p, q, f, cfg, static_cast<int>(cfg.constant("smooth_order", 2.0))), {}};
  }
  if (id == "powerlaw") return {powerlaw_stub(p, q, f, cfg), {}};
  throw ValidationError("unknown protocol '" + id + "'");
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const char* instance_name(InstanceKind k) {
  for (const auto& [name, kind] : instance_table())
    if (kind == k) return name.c_str();
  return "?";
}

InstanceKind parse_instance(const std::string& name) {
  for (const auto& [n, kind] : instance_table())
    if (n == name) return kind;
  throw ValidationError("unknown instance generator '" + name + "'");
}

void ExperimentSpec::validate() const {
  if (trials < 1) throw ValidationError("trials must be at least 1");
  if (epsilons.empty()) throw ValidationError("no epsilon given");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0 && epsilons[i] < 1.0)) throw ValidationError("epsilon must lie in (0,1)");
    if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw ValidationError("epsilons must be strictly decreasing");
  }
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0,1)");
  const auto& ids = protocol_ids();
  if (std::find(ids.begin(), ids.end(), protocol) == ids.end()) {
    throw ValidationError("unknown protocol '" + protocol + "'");
  }
  parse_family(family);
}

bool TrialRecord::operator==(const TrialRecord& o) const {
  return protocol == o.protocol && family == o.family && n == o.n && epsilon == o.epsilon && trial == o.trial &&
         estimate == o.estimate && truth == o.truth && abs_error == o.abs_error && bits_alice == o.bits_alice &&
         bits_bob == o.bits_bob && rounds == o.rounds && seed == o.seed;
}

const std::vector<std::string>& protocol_ids() {
  static const std::vector<std::string> ids{"sampling", "debias", "svd",    "spectral", "hybrid",
                                            "eq",       "sparse", "gt",     "toeplitz", "abs",
                                            "convex",   "smooth", "powerlaw"};
  return ids;
}

TargetFn build_spec_function(const ExperimentSpec& spec) {
  return build_family(parse_family(spec.family), spec.params);
}

std::pair<ProbVec, ProbVec> make_instance(const ExperimentSpec& spec, const TargetFn& f, std::size_t trial) {
  Rng rng = Rng(spec.seed).split(0xA11CE).split(spec.fixed_instance ? 0 : trial);
  const auto support = static_cast<std::size_t>(spec.constants.count("support") ? spec.constants.at("support") : 16.0);
  Rng ra = rng.split(1), rb = rng.split(2);
  return {draw_instance(spec.instance, f.rows(), support, ra), draw_instance(spec.instance, f.cols(), support, rb)};
}

std::size_t worker_count() {
  if (const char* env = std::getenv("ESTCOMM_THREADS")) {
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    if (end != env && *end == '\0' && v >= 1) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<TrialRecord> run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const TargetFn f = build_spec_function(spec);
  const std::size_t tasks = spec.epsilons.size() * spec.trials;
  std::vector<TrialRecord> out(tasks);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;

  auto work = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks) return;
      const std::size_t ei = i / spec.trials, trial = i % spec.trials;
      try {
        const auto [p, q] = make_instance(spec, f, trial);
        ProtocolConfig cfg;
        cfg.epsilon = spec.epsilons[ei];
        cfg.delta = spec.delta;
        cfg.access = spec.access;
        cfg.constants = spec.constants;
        cfg.seed = Rng::stream(spec.seed, (static_cast<std::uint64_t>(ei) << 32) | trial).next();
        auto o = dispatch(spec.protocol, p, q, f, cfg);
        TrialRecord& r = out[i];
        r.protocol = spec.protocol;
        r.family = spec.family;
        r.n = f.rows();
        r.epsilon = cfg.epsilon;
        r.trial = trial;
        r.estimate = o.report.estimate;
        r.truth = exact_expectation(p, q, f);
        r.abs_error = std::abs(r.estimate - r.truth);
        r.bits_alice = o.report.ledger.bits_alice();
        r.bits_bob = o.report.ledger.bits_bob();
        r.rounds = o.report.ledger.rounds();
        r.seed = cfg.seed;
        r.z = o.z;
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
        next.store(tasks);
        return;
      }
    }
  };

  const std::size_t workers = std::min(worker_count(), tasks);
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

ScalingFit fit_points(std::vector<std::pair<double, double>> points) {
  if (points.size() < 3) throw ValidationError("a scaling fit needs at least 3 epsilon values");
  std::sort(points.begin(), points.end());
  const double n = static_cast<double>(points.size());
  double sx = 0, sy = 0;
  for (auto [x, y] : points) {
    sx += x;
    sy += y;
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (auto [x, y] : points) {
    sxx += (x - mx) * (x - mx);
    sxy += (x - mx) * (y - my);
    syy += (y - my) * (y - my);
  }
  if (sxx == 0.0) throw ValidationError("a scaling fit needs distinct epsilon values");
  ScalingFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
  fit.points = std::move(points);
  return fit;
}

ScalingFit fit_scaling(const std::vector<TrialRecord>& records) {
  std::map<double, std::vector<double>> by_eps;
  for (const auto& r : records) by_eps[r.epsilon].push_back(static_cast<double>(r.bits_alice + r.bits_bob));
  std::vector<std::pair<double, double>> pts;
  for (auto& [eps, bits] : by_eps) {
    std::sort(bits.begin(), bits.end());
    const std::size_t m = bits.size();
    const double med = m % 2 ? bits[m / 2] : 0.5 * (bits[m / 2 - 1] + bits[m / 2]);
    if (!(med > 0.0)) throw ValidationError("cannot fit zero-bit protocols on a log scale");
    pts.push_back({std::log(1.0 / eps), std::log(med)});
  }
  return fit_points(std::move(pts));
}

double wilson_upper(std::size_t failures, std::size_t n, double z) {
  if (n == 0) return 1.0;
  const double nd = static_cast<double>(n);
  const double ph = static_cast<double>(failures) / nd;
  const double z2 = z * z;
  const double centre = ph + z2 / (2.0 * nd);
  const double half = z * std::sqrt(ph * (1.0 - ph) / nd + z2 / (4.0 * nd * nd));
  return (centre + half) / (1.0 + z2 / nd);
}

FailureSummary summarize_failures(const std::vector<TrialRecord>& records) {
  FailureSummary s;
  s.trials = records.size();
  std::vector<double> bits;
  for (const auto& r : records) {
    s.failures += r.abs_error > r.epsilon;
    bits.push_back(static_cast<double>(r.bits_alice + r.bits_bob));
  }
  if (!records.empty()) {
    s.rate = static_cast<double>(s.failures) / static_cast<double>(s.trials);
    std::sort(bits.begin(), bits.end());
    const std::size_t m = bits.size();
    s.median_bits = m % 2 ? bits[m / 2] : 0.5 * (bits[m / 2 - 1] + bits[m / 2]);
  }
  s.wilson = wilson_upper(s.failures, s.trials);
  return s;
}

void write_csv(const std::vector<TrialRecord>& records, std::ostream& out) {
  out << kCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.protocol << ',' << r.family << ',' << r.n << ',' << fmt(r.epsilon) << ',' << r.trial << ','
        << fmt(r.estimate) << ',' << fmt(r.truth) << ',' << fmt(r.abs_error) << ',' << r.bits_alice << ','
        << r.bits_bob << ',' << r.rounds << ',' << r.seed << '\n';
  }
}

void export_csv(const std::vector<TrialRecord>& records, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_csv(records, f);
  if (!f.flush()) throw std::runtime_error("write to '" + path + "' failed");
}

void export_csv(const ScalingFit& fit, const std::string& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "' for writing");
  f << "slope,intercept,r_squared,log_inv_epsilon,log_median_bits\n";
  for (auto [x, y] : fit.points) {
    f << fmt(fit.slope) << ',' << fmt(fit.intercept) << ',' << fmt(fit.r_squared) << ',' << fmt(x) << ',' << fmt(y)
      << '\n';
  }
  if (!f.flush()) throw std::runtime_error("write to '" + path + "' failed");
}

std::vector<TrialRecord> read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kCsvHeader) throw ValidationError("missing or unexpected CSV header");
  std::vector<TrialRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 12) throw ValidationError("CSV row with " + std::to_string(cells.size()) + " fields");
    TrialRecord r;
    r.protocol = cells[0];
    r.family = cells[1];
    r.n = std::stoull(cells[2]);
    r.epsilon = std::stod(cells[3]);
    r.trial = std::stoull(cells[4]);
    r.estimate = std::stod(cells[5]);
    r.truth = std::stod(cells[6]);
    r.abs_error = std::stod(cells[7]);
    r.bits_alice = std::stoull(cells[8]);
    r.bits_bob = std::stoull(cells[9]);
    r.rounds = std::stoull(cells[10]);
    r.seed = std::stoull(cells[11]);
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<TrialRecord> read_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open '" + path + "'");
  return read_csv(f);
}

}  // namespace estcomm
