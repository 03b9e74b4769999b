#pragma once

#include <Eigen/Dense>
#include <functional>

#include "estcomm/core.hpp"
#include "estcomm/target_fn.hpp"

namespace estcomm {

/// Protocols for arbitrary bounded f. Every protocol returns its estimate as
/// output by the last receiver, the full transcript cost, and the exact value
/// for comparison. Randomized protocols succeed with probability >= 0.9 per
/// run and use median amplification when cfg.delta is smaller.

using Protocol =
    std::function<EstimateReport(const ProbVec&, const ProbVec&, const TargetFn&, const ProtocolConfig&)>;

inline constexpr double kBaseFailure = 0.1;

/// k = ceil(c/eps^2) independent pairs (c = "sampling_k", default 4).
EstimateReport random_sampling_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f,
                                        const ProtocolConfig& cfg);

/// E_{a~p} f(a,y) + E_{b~q} f(x,b) - f(x,y), computed exactly.
double g_value(const ProbVec& p, const ProbVec& q, const TargetFn& f, std::size_t x, std::size_t y);

struct GEstimate {
  double value;
  CostLedger ledger;
};

/// Two-message estimate of g(x,y) within `budget`. In sample-only mode both
/// conditional means are Monte Carlo averages; `fail` is the allowed failure
/// probability of that step.
GEstimate estimate_g_two_round(const ProbVec& p, const ProbVec& q, const TargetFn& f, std::size_t x,
                               std::size_t y, double budget, AccessMode access, Rng& rng, double fail = 0.01);

/// Hoeffding sample count so that a mean of [-1,1] values is within t with
/// probability >= 1 - fail.
std::size_t hoeffding_samples(double t, double fail);

struct DebiasPlan {
  std::size_t k_outer;
  double g_precision;
  std::size_t inner_sample_count;  // 0 in full-distribution mode
};

DebiasPlan debias_plan(const ProtocolConfig& cfg);

struct DebiasResult {
  EstimateReport report;
  /// Average of the exact g over the k x k sample grid.
  double z;
  std::size_t k;
};

/// Single run (no amplification) that also exposes the unbiased statistic z.
DebiasResult debiasing_run(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg);

EstimateReport debiasing_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg);

/// Deterministic protocol using the top-r singular triples. Throws
/// ApproximationError if the rank-r truncation is off by more than eps/2 in
/// some entry.
EstimateReport svd_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                            std::size_t r);

/// Entrywise max error of the rank-r truncated SVD of f.
double truncation_error(const TargetFn& f, std::size_t r);

struct SketchResult {
  double estimate;
  CostLedger ledger;
  std::size_t k;  // number of sign vectors (0 when the answer is trivial)
};

/// Alice holds a, Bob holds b; estimate a.b within delta_err*|a||b| w.p. >= 0.9.
SketchResult real_ip_sketch(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double delta_err, Rng& rng,
                            double k_factor = 100.0);

struct SpectralPlan {
  double beta;
  std::size_t t_cut;
  std::size_t sketch_dim;
  double sketch_delta;
};

/// Per-run bookkeeping of the error budget split.
struct SpectralTrace {
  SpectralPlan plan{};
  double heavy_error_bound = 0.0;   // bound on the error of the heavy terms
  double exact_error_bound = 0.0;   // bound on the error of the top-t part
  double sketch_error_bound = 0.0;  // sketch_delta * |a| * |b| bound (sigma * beta * delta)
  std::size_t heavy_alice = 0;
  std::size_t heavy_bob = 0;
};

EstimateReport spectral_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f, const ProtocolConfig& cfg,
                                 SpectralTrace* trace = nullptr);

/// Top t singular directions handled exactly, the rest by the spectral protocol.
EstimateReport spectral_hybrid_protocol(const ProbVec& p, const ProbVec& q, const TargetFn& f,
                                        const ProtocolConfig& cfg, std::size_t t, SpectralTrace* trace = nullptr);

/// Run `protocol` on the four normalized sign parts of (pt, qt) and recombine.
EstimateReport signed_extension(const Protocol& protocol, const SignedVec& pt, const SignedVec& qt,
                                const TargetFn& f, const ProtocolConfig& cfg);

/// Error bound eps(|p|_1|q|_1 + |p|_1 + |q|_1) of signed_extension.
double signed_error_bound(double eps, const SignedVec& pt, const SignedVec& qt);

}  // namespace estcomm
