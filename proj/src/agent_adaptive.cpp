#include "aql/agent_adaptive.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "aql/errors.hpp"

namespace aql::agent {

double learning_rate(long long t, int H) {
    if (t < 1 || H < 1) throw invalid_input_error("learning_rate: needs t >= 1, H >= 1");
    return static_cast<double>(H + 1) / (H + t);
}

double exploration_bonus(long long t, const AgentConfig& cfg) {
    if (t < 1) throw invalid_input_error("exploration_bonus: needs t >= 1");
    if (cfg.H < 1 || cfg.episodes < 1 || cfg.delta <= 0.0 || cfg.delta >= 1.0 ||
        cfg.lipschitz < 0.0 || cfg.d_max <= 0.0)
        throw invalid_input_error("exploration_bonus: bad config");
    double lg = std::log(4.0 * cfg.H * static_cast<double>(cfg.episodes) / cfg.delta);
    double h3 = static_cast<double>(cfg.H) * cfg.H * cfg.H;
    return 2.0 * std::sqrt(h3 * lg / t) + 4.0 * cfg.lipschitz * cfg.d_max / std::sqrt(t);
}

namespace {

long long isqrt_floor(long long v) {
    if (v < 0) return -1;
    long long r = static_cast<long long>(std::sqrt(static_cast<double>(v)));
    while (r > 0 && r * r > v) --r;
    while ((r + 1) * (r + 1) <= v) ++r;
    return r;
}

}  // namespace

PartitionTree::PartitionTree(int stage, const MetricSpec& spec, const WitnessGrid& grid,
                             const AgentConfig& cfg)
    : stage_(stage), spec_(spec), grid_(grid), cfg_(cfg) {
    if (grid_.state_axes.size() != 1 || grid_.action_axes.size() != 1)
        throw invalid_input_error("PartitionTree: needs 1-d state and action witness axes");
    const auto& sa = grid_.state_axes[0];
    const auto& aa = grid_.action_axes[0];
    scount_ = sa.n;
    acount_ = aa.n;
    slo_ = sa.lo;
    alo_ = aa.lo;
    step_ = sa.step();
    if (std::abs(aa.step() - step_) > 1e-12 * std::max(1.0, std::abs(step_)))
        throw invalid_input_error("PartitionTree: state and action witness spacing must match");
    if (std::abs(spec_.d_max - cfg_.d_max) > 1e-12 * std::max(1.0, cfg_.d_max))
        throw invalid_input_error("PartitionTree: metric d_max and config d_max must agree");

    double ratio = cfg_.d_max / step_;
    log2_span_ = static_cast<int>(std::lround(std::log2(ratio)));
    if (log2_span_ < 1 || std::abs(ratio - std::ldexp(1.0, log2_span_)) > 1e-9 * ratio)
        throw invalid_input_error("PartitionTree: d_max / spacing must be a power of two");
    if (cfg_.max_depth > log2_span_ - 1)
        throw invalid_input_error(
            "PartitionTree: witness spacing exceeds half the smallest allowed radius");
    if (cfg_.max_depth < 0) throw invalid_input_error("PartitionTree: negative max_depth");

    Ball root;
    root.id = 0;
    root.depth = 0;
    root.radius = cfg_.d_max;
    root.ci = (scount_ - 1) / 2;
    root.cj = (acount_ - 1) / 2;
    root.cx = sa.at(root.ci);
    root.ca = aa.at(root.cj);
    root.q = static_cast<double>(cfg_.H);
    // The root ball must contain the whole witness grid.
    for (int i : {0, scount_ - 1})
        for (int j : {0, acount_ - 1})
            if (!ball_contains(root, i, j))
                throw invalid_input_error(
                    "PartitionTree: d_max too small, root ball misses grid corners");

    balls_.push_back(root);
    buckets_.assign(1, {});
    bucket_insert(balls_[0]);
    stamp_.assign(acount_, 0);
}

int PartitionTree::snap_state(double x) const { return grid_.state_axes[0].snap(x); }

void PartitionTree::bucket_insert(const Ball& b) {
    if (static_cast<int>(buckets_.size()) <= b.depth) buckets_.resize(b.depth + 1);
    auto& level = buckets_[b.depth];
    int hw = half_width(b.depth);
    int ncells = (scount_ - 1) / hw + 2;
    if (static_cast<int>(level.size()) < ncells) level.resize(ncells);
    level[b.ci / hw].push_back(b.id);
}

bool PartitionTree::ball_contains(const Ball& b, int i, int j) const {
    int di = std::abs(i - b.ci), dj = std::abs(j - b.cj);
    int m = half_width(b.depth);
    switch (spec_.kind) {
        case metric::Kind::product_max:
            return di < m && dj < m;
        case metric::Kind::product_sum:
            return di + dj < m;
        case metric::Kind::euclidean_joint:
            return static_cast<long long>(di) * di + static_cast<long long>(dj) * dj <
                   static_cast<long long>(m) * m;
    }
    return false;
}

bool PartitionTree::owned_by_smaller(int i, int j, int depth) const {
    for (int dd = depth + 1; dd <= deepest_; ++dd) {
        const auto& level = buckets_[dd];
        if (level.empty()) continue;
        int hw = half_width(dd);
        int cell = i / hw;
        for (int c = std::max(0, cell - 1); c <= std::min<int>(level.size() - 1, cell + 1); ++c)
            for (int id : level[c]) {
                const Ball& b = balls_[id];
                if (b.active && ball_contains(b, i, j)) return true;
            }
    }
    return false;
}

// Walk the fiber {x} x A once, deepest level first. A ball is reported as
// relevant the moment a witness action in its slice is not yet owned by a
// strictly smaller active ball; after a level is scanned its active slices
// become owned for the shallower levels.
template <typename Fn>
void PartitionTree::scan_fiber(int si, Fn&& per_ball) const {
    if (epoch_ == std::numeric_limits<std::uint32_t>::max()) {
        std::fill(stamp_.begin(), stamp_.end(), 0);
        epoch_ = 0;
    }
    ++epoch_;

    auto slice = [&](const Ball& b, int& jlo, int& jhi) {
        int di = std::abs(si - b.ci);
        int m = half_width(b.depth);
        switch (spec_.kind) {
            case metric::Kind::product_max:
                if (di >= m) return false;
                jlo = b.cj - m + 1;
                jhi = b.cj + m - 1;
                break;
            case metric::Kind::product_sum: {
                if (di >= m) return false;
                int w = m - di;
                jlo = b.cj - w + 1;
                jhi = b.cj + w - 1;
                break;
            }
            case metric::Kind::euclidean_joint: {
                long long mm = static_cast<long long>(m) * m -
                               static_cast<long long>(di) * di;
                if (mm <= 0) return false;
                int w = static_cast<int>(isqrt_floor(mm - 1));
                jlo = b.cj - w;
                jhi = b.cj + w;
                break;
            }
        }
        jlo = std::max(jlo, 0);
        jhi = std::min(jhi, acount_ - 1);
        return jlo <= jhi;
    };

    for (int d = deepest_; d >= 0; --d) {
        const auto& level = buckets_[d];
        if (level.empty()) continue;
        int hw = half_width(d);
        int cell = si / hw;
        int clo = std::max(0, cell - 1), chi = std::min<int>(level.size() - 1, cell + 1);

        for (int c = clo; c <= chi; ++c)
            for (int id : level[c]) {
                const Ball& b = balls_[id];
                if (!b.active) continue;
                int jlo = 0, jhi = -1;
                if (!slice(b, jlo, jhi)) continue;
                // Outward from the center action: the first unowned witness
                // action is the in-domain action closest to the center,
                // breaking the distance tie toward the lower index.
                int best_j = -1;
                int span = std::max(b.cj - jlo, jhi - b.cj);
                for (int k = 0; k <= span && best_j < 0; ++k) {
                    int jm = b.cj - k;
                    if (jm >= jlo && jm <= jhi && stamp_[jm] != epoch_) {
                        best_j = jm;
                        break;
                    }
                    int jp = b.cj + k;
                    if (k > 0 && jp >= jlo && jp <= jhi && stamp_[jp] != epoch_) best_j = jp;
                }
                if (best_j >= 0) per_ball(b, best_j);
            }

        if (d == 0) break;
        for (int c = clo; c <= chi; ++c)
            for (int id : level[c]) {
                const Ball& b = balls_[id];
                if (!b.active) continue;
                int jlo = 0, jhi = -1;
                if (!slice(b, jlo, jhi)) continue;
                for (int j = jlo; j <= jhi; ++j) stamp_[j] = epoch_;
            }
    }
}

std::vector<int> PartitionTree::relevant(double x) const {
    std::vector<int> ids;
    scan_fiber(snap_state(x), [&](const Ball& b, int) { ids.push_back(b.id); });
    std::sort(ids.begin(), ids.end());
    return ids;
}

Selection PartitionTree::select(double x) const {
    Selection sel;
    int best_depth = -1;
    scan_fiber(snap_state(x), [&](const Ball& b, int best_j) {
        bool better = sel.ball < 0 || b.q > sel.q ||
                      (b.q == sel.q &&
                       (b.depth > best_depth || (b.depth == best_depth && b.id < sel.ball)));
        if (better) {
            sel.ball = b.id;
            sel.q = b.q;
            sel.action_index = best_j;
            best_depth = b.depth;
        }
    });
    if (sel.ball < 0)
        throw invariant_violation_error("select: no active ball is relevant at state " +
                                        std::to_string(x) + " (covering broken)");
    sel.action = grid_.action_axes[0].at(sel.action_index);
    return sel;
}

int PartitionTree::select_ball(double x) const { return select(x).ball; }

double PartitionTree::choose_action(int ball_id, double x) const {
    double action = 0.0;
    bool found = false;
    scan_fiber(snap_state(x), [&](const Ball& b, int best_j) {
        if (b.id == ball_id) {
            action = grid_.action_axes[0].at(best_j);
            found = true;
        }
    });
    if (!found)
        throw invariant_violation_error("choose_action: ball " + std::to_string(ball_id) +
                                        " has no in-domain action on this fiber");
    return action;
}

double PartitionTree::value_estimate(double x) const {
    return std::min(static_cast<double>(cfg_.H), select(x).q);
}

std::vector<std::pair<int, int>> PartitionTree::domain_points(int ball_id) const {
    if (ball_id < 0 || ball_id >= static_cast<int>(balls_.size()))
        throw invalid_input_error("domain_points: no such ball");
    const Ball& b = balls_[ball_id];
    int m = half_width(b.depth);
    std::vector<std::pair<int, int>> pts;
    int ilo = std::max(0, b.ci - m + 1), ihi = std::min(scount_ - 1, b.ci + m - 1);
    for (int i = ilo; i <= ihi; ++i) {
        int di = std::abs(i - b.ci);
        int wlo, whi;
        switch (spec_.kind) {
            case metric::Kind::product_max:
                wlo = b.cj - m + 1;
                whi = b.cj + m - 1;
                break;
            case metric::Kind::product_sum:
                wlo = b.cj - (m - di) + 1;
                whi = b.cj + (m - di) - 1;
                break;
            case metric::Kind::euclidean_joint: {
                long long mm =
                    static_cast<long long>(m) * m - static_cast<long long>(di) * di;
                int w = static_cast<int>(isqrt_floor(mm - 1));
                wlo = b.cj - w;
                whi = b.cj + w;
                break;
            }
            default:
                wlo = 0;
                whi = -1;
        }
        wlo = std::max(wlo, 0);
        whi = std::min(whi, acount_ - 1);
        for (int j = wlo; j <= whi; ++j)
            if (!owned_by_smaller(i, j, b.depth)) pts.emplace_back(i, j);
    }
    return pts;
}

void PartitionTree::update(int ball_id, double reward, double v_next, long long episode,
                           StepRecord& rec) {
    if (ball_id < 0 || ball_id >= static_cast<int>(balls_.size()))
        throw invalid_input_error("update: no such ball");
    Ball& b = balls_[ball_id];
    if (!b.active) throw invariant_violation_error("update: ball is not active");
    b.count += 1;
    b.selections += 1;
    long long t = b.count;
    double bonus = exploration_bonus(t, cfg_);
    double alpha = learning_rate(t, cfg_.H);
    rec.episode = episode;
    rec.ball = ball_id;
    rec.radius = b.radius;
    rec.t = t;
    rec.b = bonus;
    rec.q_before = b.q;
    rec.reward = reward;
    rec.v_next = v_next;
    b.q = (1.0 - alpha) * b.q + alpha * (reward + v_next + bonus);
    rec.q_after = b.q;
}

int PartitionTree::try_split(int ball_id, long long episode) {
    Ball& parent = balls_.at(ball_id);
    if (!parent.active) throw invariant_violation_error("try_split: ball is not active");
    long long threshold = 1LL << (2 * parent.depth);
    if (parent.count < threshold) return 0;
    if (parent.depth >= cfg_.max_depth) return 0;  // radius floor

    auto pts = domain_points(ball_id);
    if (pts.empty())
        throw invariant_violation_error("try_split: selected ball has an empty domain");

    const int child_depth = parent.depth + 1;
    const int hw = half_width(child_depth);
    auto idist = [&](const std::pair<int, int>& p, const std::pair<int, int>& q) -> double {
        int di = std::abs(p.first - q.first), dj = std::abs(p.second - q.second);
        switch (spec_.kind) {
            case metric::Kind::product_max:
                return std::max(di, dj);
            case metric::Kind::product_sum:
                return di + dj;
            case metric::Kind::euclidean_joint:
                return std::sqrt(static_cast<double>(di) * di + static_cast<double>(dj) * dj);
        }
        return 0.0;
    };

    // Farthest-point net of the domain at the child radius, seeded at the
    // first domain point in grid order.
    std::vector<std::size_t> net{0};
    std::vector<std::size_t> alive;
    std::vector<double> dist;
    for (std::size_t i = 1; i < pts.size(); ++i) {
        double d = idist(pts[i], pts[0]);
        if (d >= hw) {
            alive.push_back(i);
            dist.push_back(d);
        }
    }
    while (!alive.empty()) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < alive.size(); ++k)
            if (dist[k] > dist[best]) best = k;
        std::size_t chosen = alive[best];
        net.push_back(chosen);
        std::size_t w = 0;
        for (std::size_t k = 0; k < alive.size(); ++k) {
            if (alive[k] == chosen) continue;
            double d = std::min(dist[k], idist(pts[alive[k]], pts[chosen]));
            if (d >= hw) {
                alive[w] = alive[k];
                dist[w] = d;
                ++w;
            }
        }
        alive.resize(w);
        dist.resize(w);
    }

    if (cfg_.verify_splits) {
        for (std::size_t i = 0; i < net.size(); ++i)
            for (std::size_t j = i + 1; j < net.size(); ++j)
                if (idist(pts[net[i]], pts[net[j]]) < hw)
                    throw invariant_violation_error("try_split: children are not a packing");
        for (const auto& p : pts) {
            bool covered = false;
            for (std::size_t c : net)
                if (idist(p, pts[c]) < hw) {
                    covered = true;
                    break;
                }
            if (!covered)
                throw invariant_violation_error("try_split: children do not cover the domain");
        }
    }
    // New centers must keep their distance from every existing ball of the
    // same radius, ever created (same-radius separation).
    if (static_cast<int>(buckets_.size()) > child_depth && !buckets_[child_depth].empty()) {
        const auto& level = buckets_[child_depth];
        for (std::size_t c : net) {
            int cell = pts[c].first / hw;
            for (int cc = std::max(0, cell - 2); cc <= std::min<int>(level.size() - 1, cell + 2);
                 ++cc)
                for (int id : level[cc])
                    if (idist(pts[c], {balls_[id].ci, balls_[id].cj}) < hw)
                        throw invariant_violation_error(
                            "try_split: child violates same-radius separation");
        }
    }

    // push_back below may reallocate balls_, so the parent is only touched
    // through its index from here on.
    parent.active = false;
    const double parent_q = parent.q;
    const long long parent_count = parent.count;
    const double child_radius = parent.radius * 0.5;
    int created = 0;
    for (std::size_t c : net) {
        Ball child;
        child.id = static_cast<int>(balls_.size());
        child.parent = ball_id;
        child.depth = child_depth;
        child.radius = child_radius;
        child.ci = pts[c].first;
        child.cj = pts[c].second;
        child.cx = grid_.state_axes[0].at(child.ci);
        child.ca = grid_.action_axes[0].at(child.cj);
        child.q = parent_q;
        child.count = parent_count;
        child.inherited = parent_count;
        child.created_episode = episode;
        balls_[ball_id].children.push_back(child.id);
        balls_.push_back(child);
        bucket_insert(balls_.back());
        ++created;
    }
    deepest_ = std::max(deepest_, child_depth);
    ++splits_;
    return created;
}

RunResult run_adaptive(const env::Environment& environment, const AgentConfig& cfg_in,
                       std::uint64_t seed, const RunOptions& options) {
    if (environment.state_dim() != 1 || environment.action_dim() != 1)
        throw invalid_input_error("run_adaptive: needs 1-d state and action environments");
    AgentConfig cfg = cfg_in;
    cfg.H = environment.horizon();
    auto spec = environment.metric();
    cfg.d_max = spec.d_max;
    if (cfg.lipschitz < 0.0) cfg.lipschitz = environment.lipschitz_hint();
    if (cfg.episodes < 1) throw invalid_input_error("run_adaptive: episodes must be >= 1");

    WitnessGrid grid = environment.make_witness_grid(cfg.max_depth);
    std::vector<PartitionTree> trees;
    trees.reserve(cfg.H);
    for (int h = 1; h <= cfg.H; ++h) trees.emplace_back(h, spec, grid, cfg);

    std::mt19937_64 rng(seed);
    RunResult res;
    res.env_name = environment.name();
    res.agent_kind = "adaptive";
    res.cfg = cfg;
    res.seed = seed;
    const auto& sx = grid.state_axes[0];

    const long long K = cfg.episodes;
    if (options.collect_steps) res.steps.reserve(K * cfg.H);
    res.returns.reserve(K);
    for (long long k = 1; k <= K; ++k) {
        std::vector<double> x = environment.reset(k, K);
        res.starts.push_back(x);
        double ret = 0.0;
        Selection sel = trees[0].select(x[0]);
        for (int h = 1; h <= cfg.H; ++h) {
            StepRecord rec;
            rec.h = h;
            rec.x = x[0];
            rec.xs = sx.at(sx.snap(x[0]));
            rec.a = sel.action;
            auto [reward, xn] = environment.step(h, x, {sel.action}, rng);
            double v_next = 0.0;
            Selection nsel;
            if (h < cfg.H) {
                nsel = trees[h].select(xn[0]);
                v_next = std::min(static_cast<double>(cfg.H), nsel.q);
            }
            trees[h - 1].update(sel.ball, reward, v_next, k, rec);
            rec.split_children = trees[h - 1].try_split(sel.ball, k);
            rec.x_next = xn[0];
            if (options.collect_steps) res.steps.push_back(rec);
            ret += reward;
            x = xn;
            sel = nsel;
        }
        res.returns.push_back(ret);
        if (options.on_episode) options.on_episode(k, trees);
    }

    for (const auto& t : trees) res.final_balls.push_back(t.balls());
    return res;
}

}  // namespace aql::agent
