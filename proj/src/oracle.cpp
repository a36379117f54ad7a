#include "aql/oracle.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include "aql/errors.hpp"

namespace aql::env {

namespace {

grid::WitnessGrid make_cells(const Environment& env, double eps_grid) {
    if (eps_grid <= 0.0) throw invalid_input_error("build_oracle: eps_grid must be positive");
    grid::WitnessGrid g;
    for (int d = 0; d < env.state_dim(); ++d) {
        auto [lo, hi] = env.state_bounds(d);
        int n = static_cast<int>(std::llround((hi - lo) / eps_grid)) + 1;
        if (n < 2) n = 2;
        g.state_axes.push_back({lo, hi, n});
    }
    for (int d = 0; d < env.action_dim(); ++d) {
        auto [lo, hi] = env.action_bounds(d);
        int n = static_cast<int>(std::llround((hi - lo) / eps_grid)) + 1;
        if (n < 2) n = 2;
        g.action_axes.push_back({lo, hi, n});
    }
    return g;
}

}  // namespace

double OracleTables::q_at(int h, const std::vector<double>& x,
                          const std::vector<double>& a) const {
    if (h < 1 || h > H) throw invalid_input_error("oracle: stage out of range");
    long long s = cells.snap_state_index(x);
    long long ai = cells.snap_action_index(a);
    return q[h - 1][s * action_cells() + ai];
}

double OracleTables::v_at(int h, const std::vector<double>& x) const {
    if (h < 1 || h > H) throw invalid_input_error("oracle: stage out of range");
    return v[h - 1][cells.snap_state_index(x)];
}

double OracleTables::gap_at(int h, const std::vector<double>& x,
                            const std::vector<double>& a) const {
    if (h < 1 || h > H) throw invalid_input_error("oracle: stage out of range");
    long long s = cells.snap_state_index(x);
    long long ai = cells.snap_action_index(a);
    return gap[h - 1][s * action_cells() + ai];
}

OracleTables build_oracle(const Environment& env, double eps_grid, const OracleOptions& options) {
    OracleTables t;
    t.H = env.horizon();
    t.eps_grid = eps_grid;
    t.cells = make_cells(env, eps_grid);

    const long long S = t.cells.state_count();
    const long long A = t.cells.action_count();
    if (t.H * S * A > options.cell_cap)
        throw resource_limit_error("build_oracle: grid cell cap exceeded (" +
                                   std::to_string(t.H * S * A) + " > " +
                                   std::to_string(options.cell_cap) + " cells)");

    t.q.assign(t.H, std::vector<double>(S * A, 0.0));
    t.v.assign(t.H, std::vector<double>(S, 0.0));
    t.gap.assign(t.H, std::vector<double>(S * A, 0.0));

    const bool det = env.deterministic_kernel();
    std::mt19937_64 mc(options.mc_seed);

    for (int h = t.H; h >= 1; --h) {
        auto& qh = t.q[h - 1];
        for (long long s = 0; s < S; ++s) {
            std::vector<double> x = t.cells.state_at(s);
            for (long long ai = 0; ai < A; ++ai) {
                std::vector<double> a = t.cells.action_at(ai);
                double val = env.reward(h, x, a);
                if (h < t.H) {
                    const auto& vnext = t.v[h];
                    if (det) {
                        std::mt19937_64 unused(0);
                        auto xn = env.next_state(h, x, a, unused);
                        val += vnext[t.cells.snap_state_index(xn)];
                    } else {
                        double acc = 0.0;
                        for (int d = 0; d < options.mc_draws; ++d) {
                            auto xn = env.next_state(h, x, a, mc);
                            acc += vnext[t.cells.snap_state_index(xn)];
                        }
                        val += acc / options.mc_draws;
                    }
                }
                qh[s * A + ai] = val;
            }
        }
        auto& vh = t.v[h - 1];
        auto& gh = t.gap[h - 1];
        for (long long s = 0; s < S; ++s) {
            double best = qh[s * A];
            for (long long ai = 1; ai < A; ++ai) best = std::max(best, qh[s * A + ai]);
            vh[s] = best;
            for (long long ai = 0; ai < A; ++ai) gh[s * A + ai] = best - qh[s * A + ai];
        }
    }
    return t;
}

double gap(const OracleTables& oracle, int h, const std::vector<double>& x,
           const std::vector<double>& a) {
    return oracle.gap_at(h, x, a);
}

LipschitzEstimate estimate_lipschitz(const OracleTables& oracle, const Environment& env,
                                     int random_pairs, std::uint64_t seed) {
    LipschitzEstimate out;
    const auto& cells = oracle.cells;
    const long long S = cells.state_count();
    const long long A = cells.action_count();
    const auto spec = env.metric();

    // Sampling is axis-aligned: one coordinate moves, the rest stay fixed.
    // This measures the per-coordinate slope that lipschitz_hint() bounds.
    auto q_slope = [&](int h, long long s1, long long a1, long long s2, long long a2) {
        metric::Point p{cells.state_at(s1), cells.action_at(a1)};
        metric::Point r{cells.state_at(s2), cells.action_at(a2)};
        double d = metric::distance(spec, p, r);
        if (d <= 0.0) return 0.0;
        return std::abs(oracle.q[h - 1][s1 * A + a1] - oracle.q[h - 1][s2 * A + a2]) / d;
    };

    // Exhaustive cell-neighbor pairs (valid only for 1-d axes; higher
    // dimensional neighbors are covered by the random pass below).
    if (cells.state_axes.size() == 1 && cells.action_axes.size() == 1) {
        for (int h = 1; h <= oracle.H; ++h) {
            for (long long s = 0; s < S; ++s)
                for (long long a = 0; a + 1 < A; ++a)
                    out.q_slope = std::max(out.q_slope, q_slope(h, s, a, s, a + 1));
            for (long long s = 0; s + 1 < S; ++s)
                for (long long a = 0; a < A; ++a)
                    out.q_slope = std::max(out.q_slope, q_slope(h, s, a, s + 1, a));
        }
    }

    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<long long> ds(0, S - 1), da(0, A - 1);
    std::uniform_int_distribution<int> dh(1, oracle.H), coin(0, 1);
    for (int i = 0; i < random_pairs; ++i) {
        int h = dh(rng);
        long long s = ds(rng), a = da(rng);
        if (coin(rng))
            out.q_slope = std::max(out.q_slope, q_slope(h, s, a, ds(rng), a));
        else
            out.q_slope = std::max(out.q_slope, q_slope(h, s, a, s, da(rng)));
    }

    // V* slope under the state metric.
    std::vector<std::vector<double>> action_sample;
    for (long long a = 0; a < std::min<long long>(A, 10); ++a)
        action_sample.push_back(cells.action_at(a * std::max<long long>(1, A / 10)));
    for (int h = 1; h <= oracle.H; ++h) {
        for (long long s = 0; s + 1 < S; ++s) {
            double d = metric::state_distance(spec, cells.state_at(s), cells.state_at(s + 1),
                                              action_sample);
            if (d <= 0.0) continue;
            out.v_slope =
                std::max(out.v_slope, std::abs(oracle.v[h - 1][s] - oracle.v[h - 1][s + 1]) / d);
        }
    }
    return out;
}

void export_oracle_csv(const OracleTables& oracle, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw invalid_input_error("export_oracle_csv: cannot open " + path);
    const auto& cells = oracle.cells;
    f << "h";
    for (std::size_t d = 0; d < cells.state_axes.size(); ++d) f << ",x" << d;
    for (std::size_t d = 0; d < cells.action_axes.size(); ++d) f << ",a" << d;
    f << ",Qstar,Vstar,gap\n";
    char buf[64];
    const long long S = cells.state_count(), A = cells.action_count();
    for (int h = 1; h <= oracle.H; ++h)
        for (long long s = 0; s < S; ++s)
            for (long long a = 0; a < A; ++a) {
                f << h;
                for (double xv : cells.state_at(s)) {
                    std::snprintf(buf, sizeof buf, ",%.12g", xv);
                    f << buf;
                }
                for (double av : cells.action_at(a)) {
                    std::snprintf(buf, sizeof buf, ",%.12g", av);
                    f << buf;
                }
                std::snprintf(buf, sizeof buf, ",%.12g,%.12g,%.12g\n", oracle.q[h - 1][s * A + a],
                              oracle.v[h - 1][s], oracle.gap[h - 1][s * A + a]);
                f << buf;
            }
}

}  // namespace aql::env
