#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "aql/env.hpp"
#include "aql/witness.hpp"

namespace aql::env {

/// Ground-truth optimal value tables on a regular evaluation grid, computed
/// by backward induction. Continuous queries snap to the nearest grid cell.
struct OracleTables {
    int H = 0;
    double eps_grid = 0.0;
    grid::WitnessGrid cells;  // state/action axes at eps_grid resolution
    // Stage-major tables, h in 1..H stored at index h-1; (s, a) flattened
    // as s * action_count + a.
    std::vector<std::vector<double>> q;
    std::vector<std::vector<double>> v;
    std::vector<std::vector<double>> gap;

    long long state_cells() const { return cells.state_count(); }
    long long action_cells() const { return cells.action_count(); }

    double q_at(int h, const std::vector<double>& x, const std::vector<double>& a) const;
    double v_at(int h, const std::vector<double>& x) const;
    double gap_at(int h, const std::vector<double>& x, const std::vector<double>& a) const;
    double v1(const std::vector<double>& x) const { return v_at(1, x); }
};

struct OracleOptions {
    long long cell_cap = 50'000'000;  // guard: H * states * actions
    int mc_draws = 512;               // expectation sample size for noisy kernels
    std::uint64_t mc_seed = 7;
};

/// Backward induction at resolution eps_grid. Throws resource_limit_error
/// when the table would exceed options.cell_cap cells.
OracleTables build_oracle(const Environment& env, double eps_grid,
                          const OracleOptions& options = {});

/// Suboptimality of (x, a) at stage h; 0 at the argmax, never negative.
double gap(const OracleTables& oracle, int h, const std::vector<double>& x,
           const std::vector<double>& a);

struct LipschitzEstimate {
    double q_slope = 0.0;  // max |dQ*| / distance over sampled pairs
    double v_slope = 0.0;  // max |dV*| / state_distance over sampled pairs
};

/// Empirical Lipschitz constants of the oracle tables: exhaustive over
/// axis-neighbor pairs plus seeded random long-range pairs.
LipschitzEstimate estimate_lipschitz(const OracleTables& oracle, const Environment& env,
                                     int random_pairs = 20000, std::uint64_t seed = 1);

/// CSV export, one row per (h, state, action): h, x..., a..., Qstar, Vstar, gap.
void export_oracle_csv(const OracleTables& oracle, const std::string& path);

}  // namespace aql::env
