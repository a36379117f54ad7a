#include "aql/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "aql/errors.hpp"

namespace aql::diag {

double alpha_weight(long long t, long long i, int H) {
    if (i < 1 || t < i) throw invalid_input_error("alpha_weight: needs 1 <= i <= t");
    double w = agent::learning_rate(i, H);
    for (long long j = i + 1; j <= t; ++j) w *= 1.0 - agent::learning_rate(j, H);
    return w;
}

double beta(long long t, const AgentConfig& cfg) {
    if (t < 1) throw invalid_input_error("beta: needs t >= 1");
    double s = 0.0;
    for (long long i = 1; i <= t; ++i) {
        double a = agent::learning_rate(i, cfg.H);
        s = (1.0 - a) * s + a * agent::exploration_bonus(i, cfg);
    }
    return 2.0 * s;
}

double beta_bound(long long t, const AgentConfig& cfg) {
    if (t < 1) throw invalid_input_error("beta_bound: needs t >= 1");
    double lg = std::log(4.0 * cfg.H * static_cast<double>(cfg.episodes) / cfg.delta);
    double h3 = static_cast<double>(cfg.H) * cfg.H * cfg.H;
    return 8.0 * std::sqrt(h3 * lg / t) + 16.0 * cfg.lipschitz * cfg.d_max / std::sqrt(t);
}

std::vector<double> beta_table(long long t_max, const AgentConfig& cfg) {
    if (t_max < 1) throw invalid_input_error("beta_table: needs t_max >= 1");
    std::vector<double> out(t_max + 1, 0.0);
    double s = 0.0;
    for (long long i = 1; i <= t_max; ++i) {
        double a = agent::learning_rate(i, cfg.H);
        s = (1.0 - a) * s + a * agent::exploration_bonus(i, cfg);
        out[i] = 2.0 * s;
    }
    return out;
}

double clip(double mu, double nu) { return mu >= nu ? mu : 0.0; }

double near_optimal_c1(int H, double d_max, double L) {
    if (H < 1 || d_max <= 0.0 || L < 0.0) throw invalid_input_error("near_optimal_c1: bad args");
    return 2.0 * (H + 1) / d_max + 2.0 * L;
}

NearOptimalSet near_optimal_set(const OracleTables& oracle, int h, double r, double d_max,
                                double L) {
    if (h < 1 || h > oracle.H) throw invalid_input_error("near_optimal_set: stage out of range");
    if (!(r > 0.0 && r <= d_max))
        throw invalid_input_error("near_optimal_set: r must lie in (0, d_max]");
    if (oracle.cells.state_axes.size() != 1 || oracle.cells.action_axes.size() != 1)
        throw invalid_input_error("near_optimal_set: needs 1-d oracle tables");

    NearOptimalSet set;
    set.h = h;
    set.r = r;
    set.threshold = near_optimal_c1(oracle.H, d_max, L) * r;
    const auto& gap = oracle.gap[h - 1];
    int S = oracle.cells.state_axes[0].n;
    int A = oracle.cells.action_axes[0].n;
    for (int si = 0; si < S; ++si)
        for (int aj = 0; aj < A; ++aj)
            if (gap[static_cast<std::size_t>(si) * A + aj] <= set.threshold)
                set.members.emplace_back(si, aj);
    return set;
}

namespace {

std::vector<metric::Point> cells_to_points(const OracleTables& oracle,
                                           const std::vector<std::pair<int, int>>& members) {
    const auto& sx = oracle.cells.state_axes[0];
    const auto& ax = oracle.cells.action_axes[0];
    std::vector<metric::Point> pts;
    pts.reserve(members.size());
    for (auto [si, aj] : members) pts.push_back({{sx.at(si)}, {ax.at(aj)}});
    return pts;
}

}  // namespace

ScaleProfile zooming_profile(const OracleTables& oracle, int h, const std::vector<double>& scales,
                             const MetricSpec& spec, double L) {
    ScaleProfile p;
    for (double r : scales) {
        auto set = near_optimal_set(oracle, h, r, spec.d_max, L);
        auto pts = cells_to_points(oracle, set.members);
        auto packing = metric::packing_number(pts, r, spec);
        p.scales.push_back(r);
        p.counts.push_back(packing.count);
        p.exact.push_back(packing.exact);
    }
    return p;
}

ScaleProfile covering_profile(const OracleTables& oracle, const std::vector<double>& scales,
                              const MetricSpec& spec) {
    if (oracle.cells.state_axes.size() != 1 || oracle.cells.action_axes.size() != 1)
        throw invalid_input_error("covering_profile: needs 1-d oracle tables");
    int S = oracle.cells.state_axes[0].n;
    int A = oracle.cells.action_axes[0].n;
    std::vector<std::pair<int, int>> all;
    all.reserve(static_cast<std::size_t>(S) * A);
    for (int si = 0; si < S; ++si)
        for (int aj = 0; aj < A; ++aj) all.emplace_back(si, aj);
    auto pts = cells_to_points(oracle, all);

    ScaleProfile p;
    for (double r : scales) {
        if (!(r > 0.0)) throw invalid_input_error("covering_profile: scales must be positive");
        auto packing = metric::packing_number(pts, r, spec);
        p.scales.push_back(r);
        p.counts.push_back(packing.count);
        p.exact.push_back(packing.exact);
    }
    return p;
}

DimensionFit loglog_fit(const std::vector<double>& xs, const std::vector<double>& ys) {
    if (xs.size() != ys.size() || xs.size() < 2)
        throw invalid_input_error("loglog_fit: needs >= 2 matched points");
    int n = static_cast<int>(xs.size());
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        if (!(xs[i] > 0.0 && ys[i] > 0.0))
            throw invalid_input_error("loglog_fit: inputs must be positive");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    double mx = 0.0, my = 0.0;
    for (int i = 0; i < n; ++i) {
        mx += lx[i];
        my += ly[i];
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
    }
    if (sxx <= 0.0) throw invalid_input_error("loglog_fit: degenerate abscissa");

    DimensionFit fit;
    fit.points = n;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    if (n > 2) {
        double ss = 0.0;
        for (int i = 0; i < n; ++i) {
            double resid = ly[i] - (fit.intercept + fit.slope * lx[i]);
            ss += resid * resid;
        }
        fit.se = std::sqrt(ss / (n - 2) / sxx);
    }
    fit.lo = fit.slope - 2.0 * fit.se;
    fit.hi = fit.slope + 2.0 * fit.se;
    return fit;
}

DimensionFit dimension_fit(const std::vector<double>& scales,
                           const std::vector<long long>& counts) {
    if (scales.size() < 3) throw invalid_input_error("dimension_fit: needs >= 3 scales");
    if (scales.size() != counts.size())
        throw invalid_input_error("dimension_fit: scales/counts size mismatch");
    std::vector<double> inv(scales.size()), cnt(scales.size());
    for (std::size_t i = 0; i < scales.size(); ++i) {
        if (!(scales[i] > 0.0)) throw invalid_input_error("dimension_fit: scales must be positive");
        if (counts[i] < 1) throw invalid_input_error("dimension_fit: counts must be >= 1");
        inv[i] = 1.0 / scales[i];
        cnt[i] = static_cast<double>(counts[i]);
    }
    return loglog_fit(inv, cnt);
}

RegretReport regret(const RunResult& run, const OracleTables& oracle) {
    long long K = run.cfg.episodes;
    if (static_cast<long long>(run.returns.size()) != K ||
        static_cast<long long>(run.starts.size()) != K)
        throw invalid_input_error("regret: run is missing episodes");
    if (oracle.H != run.cfg.H) throw invalid_input_error("regret: oracle horizon mismatch");

    RegretReport rep;
    rep.K = K;
    rep.vstar.reserve(K);
    rep.cumulative.reserve(K);
    rep.returns = run.returns;
    double cum = 0.0;
    for (long long k = 0; k < K; ++k) {
        double vs = oracle.v1(run.starts[k]);
        rep.vstar.push_back(vs);
        cum += vs - run.returns[k];
        rep.cumulative.push_back(cum);
    }
    rep.total = cum;

    for (double f : {0.01, 0.03, 0.1, 0.3, 1.0}) {
        long long k = std::max<long long>(1, std::llround(f * static_cast<double>(K)));
        k = std::min(k, K);
        if (rep.checkpoints.empty() || rep.checkpoints.back() != k) rep.checkpoints.push_back(k);
    }
    std::vector<double> ks, rs;
    bool positive = true;
    for (long long k : rep.checkpoints) {
        double r = rep.cumulative[k - 1];
        if (r <= 0.0) positive = false;
        ks.push_back(static_cast<double>(k));
        rs.push_back(r);
    }
    if (positive && ks.size() >= 2) {
        rep.slope = loglog_fit(ks, rs);
        rep.slope_valid = true;
    }
    return rep;
}

SurplusLedger clipped_surplus_ledger(const RunResult& run, const OracleTables& oracle) {
    if (run.steps.empty()) throw invalid_input_error("clipped_surplus_ledger: run has no steps");
    long long t_max = 1;
    for (const auto& rec : run.steps) t_max = std::max(t_max, rec.t);
    auto betas = beta_table(t_max, run.cfg);

    // Rows keyed by (stage, ball id); ball ids are dense per stage.
    std::vector<std::vector<LedgerRow>> rows(run.cfg.H);
    SurplusLedger ledger;
    ledger.slack = oracle.eps_grid * run.cfg.lipschitz;
    for (const auto& rec : run.steps) {
        auto& stage = rows[rec.h - 1];
        if (static_cast<int>(stage.size()) <= rec.ball) stage.resize(rec.ball + 1);
        LedgerRow& row = stage[rec.ball];
        double g = env::gap(oracle, rec.h, {rec.x}, {rec.a});
        double bt = betas[rec.t];
        double clipped = clip(bt, g / (run.cfg.H + 1));
        if (row.visits == 0) {
            row.h = rec.h;
            row.ball = rec.ball;
            row.radius = rec.radius;
            row.t_min = rec.t;
            row.min_gap = g;
        }
        row.visits += 1;
        row.t_min = std::min(row.t_min, rec.t);
        row.min_gap = std::min(row.min_gap, g);
        row.sum_beta += bt;
        row.sum_clipped += clipped;
        ledger.total_beta += bt;
        ledger.total_clipped += clipped;
    }
    for (auto& stage : rows)
        for (auto& row : stage)
            if (row.visits > 0) {
                row.fully_clipped = row.sum_clipped == 0.0;
                ledger.rows.push_back(row);
            }
    return ledger;
}

TheoremBound theorem_bound(const std::vector<ScaleProfile>& zooming_per_stage,
                           const AgentConfig& cfg) {
    if (static_cast<int>(zooming_per_stage.size()) != cfg.H)
        throw invalid_input_error("theorem_bound: needs one zooming profile per stage");
    double H = cfg.H;
    double K = static_cast<double>(cfg.episodes);
    double lg = std::log(4.0 * H * K / cfg.delta);

    TheoremBound out;
    out.lead = 9.0 * H * H + 18.0 * std::sqrt(2.0 * H * H * H * K * lg);
    out.total = out.lead;
    for (const auto& prof : zooming_per_stage) {
        if (prof.scales.empty()) throw invalid_input_error("theorem_bound: empty profile");
        double best = 0.0, best_r0 = 0.0;
        bool first = true;
        for (std::size_t c = 0; c < prof.scales.size(); ++c) {
            double r0 = prof.scales[c];
            double inner = K * r0 / cfg.d_max;
            for (std::size_t i = 0; i < prof.scales.size(); ++i)
                if (prof.scales[i] >= r0 * (1.0 - 1e-12))
                    inner += static_cast<double>(prof.counts[i]) * cfg.d_max / prof.scales[i];
            if (first || inner < best) {
                best = inner;
                best_r0 = r0;
                first = false;
            }
        }
        out.stage_inner.push_back(best);
        out.stage_r0.push_back(best_r0);
        out.total += 288.0 * (std::sqrt(H * H * H * lg) + cfg.lipschitz * cfg.d_max) * best;
    }
    return out;
}

namespace {

void add_violation(CheckReport& rep, const std::string& what) {
    rep.ok = false;
    rep.violation_count += 1;
    if (rep.violations.size() < 50) rep.violations.push_back(what);
}

// Scalar specialization of the metric formulas for 1-d state/action parts:
// true iff the point is strictly inside the ball.
bool inside_ball(metric::Kind kind, double dx, double da, double r) {
    switch (kind) {
        case metric::Kind::product_max:
            return std::max(dx, da) < r;
        case metric::Kind::product_sum:
            return dx + da < r;
        case metric::Kind::euclidean_joint:
            return dx * dx + da * da < r * r;
    }
    return false;
}

}  // namespace

CheckReport check_partition(const std::vector<Ball>& balls, const WitnessGrid& grid,
                            const MetricSpec& spec) {
    if (grid.state_axes.size() != 1 || grid.action_axes.size() != 1)
        throw invalid_input_error("check_partition: needs 1-d witness axes");
    const auto& sx = grid.state_axes[0];
    const auto& ax = grid.action_axes[0];
    CheckReport rep;

    // Covering: blanket-stamp every witness cell inside any active ball.
    std::vector<std::uint8_t> covered(static_cast<std::size_t>(sx.n) * ax.n, 0);
    for (const auto& b : balls) {
        if (!b.active) continue;
        int ilo = std::max(0, sx.snap(b.cx - b.radius) - 1);
        int ihi = std::min(sx.n - 1, sx.snap(b.cx + b.radius) + 1);
        for (int i = ilo; i <= ihi; ++i) {
            double dx = std::abs(sx.at(i) - b.cx);
            if (dx >= b.radius) continue;
            int jlo = std::max(0, ax.snap(b.ca - b.radius) - 1);
            int jhi = std::min(ax.n - 1, ax.snap(b.ca + b.radius) + 1);
            for (int j = jlo; j <= jhi; ++j)
                if (inside_ball(spec.kind, dx, std::abs(ax.at(j) - b.ca), b.radius))
                    covered[static_cast<std::size_t>(i) * ax.n + j] = 1;
        }
    }
    for (int i = 0; i < sx.n; ++i)
        for (int j = 0; j < ax.n; ++j)
            if (!covered[static_cast<std::size_t>(i) * ax.n + j])
                add_violation(rep, "covering: witness cell (" + std::to_string(i) + ", " +
                                       std::to_string(j) + ") lies in no active ball");
    rep.items_checked += static_cast<long long>(covered.size());

    // Separation: centers of same-radius balls (active or split) >= radius
    // apart. Balls are binned by radius and sorted by center state.
    std::map<double, std::vector<int>> by_radius;
    for (std::size_t idx = 0; idx < balls.size(); ++idx)
        by_radius[balls[idx].radius].push_back(static_cast<int>(idx));
    for (auto& [radius, ids] : by_radius) {
        std::sort(ids.begin(), ids.end(),
                  [&](int a, int b) { return balls[a].cx < balls[b].cx; });
        for (std::size_t i = 0; i < ids.size(); ++i) {
            const Ball& a = balls[ids[i]];
            for (std::size_t j = i + 1; j < ids.size(); ++j) {
                const Ball& b = balls[ids[j]];
                if (b.cx - a.cx >= radius) break;  // no closer pair further right
                rep.items_checked += 1;
                if (inside_ball(spec.kind, std::abs(a.cx - b.cx), std::abs(a.ca - b.ca), radius))
                    add_violation(rep, "separation: balls " + std::to_string(a.id) + " and " +
                                           std::to_string(b.id) + " of radius " +
                                           std::to_string(radius) + " are too close");
            }
        }
    }
    return rep;
}

CheckReport check_counts(const std::vector<Ball>& balls, const AgentConfig& cfg) {
    CheckReport rep;
    for (const auto& b : balls) {
        rep.items_checked += 1;
        double law = cfg.d_max * std::ldexp(1.0, -b.depth);
        if (b.radius != law)
            add_violation(rep, "radius law: ball " + std::to_string(b.id) + " has radius " +
                                   std::to_string(b.radius) + ", expected " + std::to_string(law));
        if (b.count != b.inherited + b.selections)
            add_violation(rep, "conservation: ball " + std::to_string(b.id) +
                                   " count != inherited + selections");
        long long dr2 = 1LL << (2 * b.depth);  // (d_max / r)^2
        if (b.parent >= 0) {
            if (b.inherited * 4 != dr2)
                add_violation(rep, "inheritance: ball " + std::to_string(b.id) + " inherited " +
                                       std::to_string(b.inherited) + ", expected " +
                                       std::to_string(dr2 / 4));
        } else if (b.inherited != 0) {
            add_violation(rep, "inheritance: root ball " + std::to_string(b.id) +
                                   " has nonzero inherited count");
        }
        if (b.depth >= cfg.max_depth) {
            rep.excluded += 1;  // pinned at the cap; selection bound does not apply
            continue;
        }
        long long limit = (3 * dr2 + 3) / 4 + 1;  // ceil(3/4 (d_max/r)^2) + 1
        if (b.selections > limit)
            add_violation(rep, "selections: ball " + std::to_string(b.id) + " selected " +
                                   std::to_string(b.selections) + " times, limit " +
                                   std::to_string(limit));
    }
    return rep;
}

CheckReport check_optimism(const RunResult& run, const OracleTables& oracle) {
    CheckReport rep;
    double slack = oracle.eps_grid * run.cfg.lipschitz;
    for (const auto& rec : run.steps) {
        rep.items_checked += 1;
        double qstar = oracle.q_at(rec.h, {rec.x}, {rec.a});
        if (rec.q_before < qstar - slack)
            add_violation(rep, "optimism: episode " + std::to_string(rec.episode) + " stage " +
                                   std::to_string(rec.h) + " ball " + std::to_string(rec.ball) +
                                   " q " + std::to_string(rec.q_before) + " below Q* " +
                                   std::to_string(qstar) + " - slack");
    }
    return rep;
}

}  // namespace aql::diag
