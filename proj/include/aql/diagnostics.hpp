#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aql/agent_adaptive.hpp"
#include "aql/oracle.hpp"

namespace aql::diag {

using agent::AgentConfig;
using agent::Ball;
using agent::RunResult;
using env::OracleTables;
using grid::WitnessGrid;
using metric::MetricSpec;

/// Weight of the i-th of t updates in the learning-rate recursion:
/// alpha_t^i = alpha_i * prod_{j=i+1}^t (1 - alpha_j). Needs 1 <= i <= t.
double alpha_weight(long long t, long long i, int H);

/// Exact surplus beta_t = 2 * sum_{i=1}^t alpha_t^i * b_i, evaluated by the
/// O(t) recursion S_t = (1 - alpha_t) S_{t-1} + alpha_t b_t.
double beta(long long t, const AgentConfig& cfg);

/// Closed-form envelope 8 sqrt(H^3 log(4HK/delta)/t) + 16 L d_max / sqrt(t);
/// beta(t) never exceeds it.
double beta_bound(long long t, const AgentConfig& cfg);

/// beta_t for all t in 1..t_max in one sweep; index t, slot 0 unused.
std::vector<double> beta_table(long long t_max, const AgentConfig& cfg);

/// mu when mu >= nu, else 0.
double clip(double mu, double nu);

/// Near-optimality threshold slope: gap <= c1 * r admits a point at scale r.
/// c1 = 2(H+1)/d_max + 2L.
double near_optimal_c1(int H, double d_max, double L);

/// Oracle-grid cells whose gap is at most c1 * r.
struct NearOptimalSet {
    int h = 0;
    double r = 0.0;
    double threshold = 0.0;                       // c1 * r
    std::vector<std::pair<int, int>> members;     // (state cell, action cell)
};
NearOptimalSet near_optimal_set(const OracleTables& oracle, int h, double r, double d_max,
                                double L);

/// Packing count per scale. `exact` mirrors the packing_number mode flag.
struct ScaleProfile {
    std::vector<double> scales;
    std::vector<long long> counts;
    std::vector<bool> exact;
};

/// r-packing number of the stage-h near-optimal set, each scale against its
/// own set.
ScaleProfile zooming_profile(const OracleTables& oracle, int h, const std::vector<double>& scales,
                             const MetricSpec& spec, double L);

/// r-packing number of the full oracle grid: the non-adaptive comparator.
ScaleProfile covering_profile(const OracleTables& oracle, const std::vector<double>& scales,
                              const MetricSpec& spec);

/// Least-squares fit with a residual-based +-2 SE interval on the slope.
struct DimensionFit {
    double slope = 0.0;
    double intercept = 0.0;
    double se = 0.0;  // standard error of the slope
    double lo = 0.0, hi = 0.0;
    int points = 0;
};

/// Fit of log(y) against log(x); every x and y must be positive.
DimensionFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys);

/// Dimension estimate: slope of log(count) vs log(1/scale). Needs >= 3 scales.
DimensionFit dimension_fit(const std::vector<double>& scales, const std::vector<long long>& counts);

/// Reg(K) = sum_k (V*_1(x_1^k) - return_k), with a log-log slope fit of the
/// cumulative regret at geometric episode checkpoints.
struct RegretReport {
    long long K = 0;
    std::vector<double> vstar;        // V*_1 at each scripted start
    std::vector<double> returns;      // realized per-episode returns
    std::vector<double> cumulative;   // prefix sums of (vstar - return)
    double total = 0.0;
    std::vector<long long> checkpoints;  // episodes the slope fit uses
    DimensionFit slope;                  // log cumulative vs log episode
    bool slope_valid = false;            // false when a checkpoint regret is <= 0
};
RegretReport regret(const RunResult& run, const OracleTables& oracle);

/// Per-ball bookkeeping of clipped surpluses.
struct LedgerRow {
    int h = 0;
    int ball = 0;
    double radius = 0.0;
    long long visits = 0;
    long long t_min = 0;        // smallest logged t among the visits
    double min_gap = 0.0;       // smallest oracle gap among the visits
    double sum_beta = 0.0;      // sum of beta_t over the visits
    double sum_clipped = 0.0;   // sum of clip(beta_t | gap/(H+1))
    bool fully_clipped = false; // every visit clipped to zero
};

/// Total and per-ball surplus mass surviving the clip at gap/(H+1). Gaps are
/// oracle-grid gaps, so every comparison carries the reported slack
/// eps_grid * L.
struct SurplusLedger {
    double total_beta = 0.0;
    double total_clipped = 0.0;
    double slack = 0.0;
    std::vector<LedgerRow> rows;  // sorted by stage, then ball id
};
SurplusLedger clipped_surplus_ledger(const RunResult& run, const OracleTables& oracle);

/// Numeric regret upper bound assembled from per-stage zooming profiles:
/// 9H^2 + 18 sqrt(2 H^3 K log(4HK/delta))
///      + sum_h 288 (sqrt(H^3 log(4HK/delta)) + L d_max) * inner_h,
/// inner_h minimized over r0 in the profile's own scales of
/// sum_{r >= r0} N_r d_max/r + K r0/d_max.
struct TheoremBound {
    double total = 0.0;
    double lead = 0.0;                 // the two profile-independent terms
    std::vector<double> stage_inner;   // minimized inner sum per stage
    std::vector<double> stage_r0;      // minimizing r0 per stage
};
TheoremBound theorem_bound(const std::vector<ScaleProfile>& zooming_per_stage,
                           const AgentConfig& cfg);

/// Outcome of a structural audit. `violations` holds at most 50 samples;
/// `violation_count` is the real total. `excluded` counts items the audit
/// skipped by policy (balls pinned at the split-depth cap).
struct CheckReport {
    bool ok = true;
    long long items_checked = 0;
    long long violation_count = 0;
    long long excluded = 0;
    std::vector<std::string> violations;
};

/// Covering (active balls blanket the witness grid) and separation (centers
/// of same-radius balls are >= that radius apart), recomputed from ball
/// coordinates with plain float arithmetic.
CheckReport check_partition(const std::vector<Ball>& balls, const WitnessGrid& grid,
                            const MetricSpec& spec);

/// Per-ball count laws: radius = d_max/2^depth, count = inherited +
/// selections, non-root inherited = (1/4)(d_max/r)^2 exactly, selections <=
/// ceil((3/4)(d_max/r)^2) + 1. Balls at the depth cap are exempt from the
/// selection bound (they can never split) and reported via `excluded`.
CheckReport check_counts(const std::vector<Ball>& balls, const AgentConfig& cfg);

/// Optimism audit: flags steps where the selected q at selection time fell
/// below Q*(x, a) - eps_grid * L.
CheckReport check_optimism(const RunResult& run, const OracleTables& oracle);

}  // namespace aql::diag
