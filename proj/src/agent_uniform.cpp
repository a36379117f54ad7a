#include "aql/agent_uniform.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "aql/errors.hpp"

namespace aql::agent {

UniformPartition build_uniform(double epsilon, const MetricSpec& spec, const WitnessGrid& grid,
                               int H) {
    if (epsilon <= 0.0) throw invalid_input_error("build_uniform: epsilon must be positive");
    if (H < 1) throw invalid_input_error("build_uniform: H must be >= 1");
    if (grid.state_axes.size() != 1 || grid.action_axes.size() != 1)
        throw invalid_input_error("build_uniform: needs 1-d state and action witness axes");

    const auto& sa = grid.state_axes[0];
    const auto& aa = grid.action_axes[0];

    std::vector<metric::Point> points;
    points.reserve(static_cast<std::size_t>(sa.n) * aa.n);
    for (int i = 0; i < sa.n; ++i)
        for (int j = 0; j < aa.n; ++j) points.push_back({{sa.at(i)}, {aa.at(j)}});
    auto net = metric::greedy_net(points, epsilon, spec);

    UniformPartition p;
    p.spec = spec;
    p.grid = grid;
    p.epsilon = epsilon;
    p.H = H;
    for (std::size_t idx : net) {
        p.ci.push_back(static_cast<int>(idx / aa.n));
        p.cj.push_back(static_cast<int>(idx % aa.n));
        p.cx.push_back(points[idx].state[0]);
        p.ca.push_back(points[idx].action[0]);
    }
    p.q.assign(H, std::vector<double>(p.size(), static_cast<double>(H)));
    p.count.assign(H, std::vector<long long>(p.size(), 0));

    // A ball meets the fiber {x} x A exactly when its state term is below
    // epsilon: the action term is zeroed by the center action for every kind.
    p.fiber.assign(sa.n, {});
    for (int si = 0; si < sa.n; ++si)
        for (std::size_t b = 0; b < p.size(); ++b)
            if (std::abs(sa.at(si) - p.cx[b]) < epsilon)
                p.fiber[si].push_back(static_cast<int>(b));
    return p;
}

Selection select_uniform(const UniformPartition& partition, int h, double x) {
    if (h < 1 || h > partition.H) throw invalid_input_error("select_uniform: stage out of range");
    int si = partition.grid.state_axes[0].snap(x);
    const auto& q = partition.q[h - 1];
    Selection sel;
    for (int b : partition.fiber[si])
        if (sel.ball < 0 || q[b] > sel.q) {
            sel.ball = b;
            sel.q = q[b];
        }
    if (sel.ball < 0)
        throw invariant_violation_error("select_uniform: no ball meets the fiber at state " +
                                        std::to_string(x));
    sel.action_index = partition.cj[sel.ball];
    sel.action = partition.ca[sel.ball];
    return sel;
}

RunResult run_uniform(const env::Environment& environment, const UniformPartition& partition,
                      const AgentConfig& cfg_in, std::uint64_t seed, bool collect_steps) {
    if (environment.state_dim() != 1 || environment.action_dim() != 1)
        throw invalid_input_error("run_uniform: needs 1-d state and action environments");
    AgentConfig cfg = cfg_in;
    cfg.H = environment.horizon();
    cfg.d_max = environment.metric().d_max;
    if (cfg.lipschitz < 0.0) cfg.lipschitz = environment.lipschitz_hint();
    if (cfg.episodes < 1) throw invalid_input_error("run_uniform: episodes must be >= 1");
    if (partition.H != cfg.H)
        throw invalid_input_error("run_uniform: partition stage count differs from the horizon");

    UniformPartition p = partition;  // private statistics; geometry shared by value
    std::mt19937_64 rng(seed);
    RunResult res;
    res.env_name = environment.name();
    res.agent_kind = "uniform";
    res.cfg = cfg;
    res.seed = seed;
    res.epsilon = p.epsilon;
    const auto& sx = p.grid.state_axes[0];

    const long long K = cfg.episodes;
    res.returns.reserve(K);
    for (long long k = 1; k <= K; ++k) {
        std::vector<double> x = environment.reset(k, K);
        res.starts.push_back(x);
        double ret = 0.0;
        Selection sel = select_uniform(p, 1, x[0]);
        for (int h = 1; h <= cfg.H; ++h) {
            StepRecord rec;
            rec.episode = k;
            rec.h = h;
            rec.x = x[0];
            rec.xs = sx.at(sx.snap(x[0]));
            rec.a = sel.action;
            auto [reward, xn] = environment.step(h, x, {sel.action}, rng);
            double v_next = 0.0;
            Selection nsel;
            if (h < cfg.H) {
                nsel = select_uniform(p, h + 1, xn[0]);
                v_next = std::min(static_cast<double>(cfg.H), nsel.q);
            }
            long long t = ++p.count[h - 1][sel.ball];
            double bonus = exploration_bonus(t, cfg);
            double alpha = learning_rate(t, cfg.H);
            double& qv = p.q[h - 1][sel.ball];
            rec.ball = sel.ball;
            rec.radius = p.epsilon;
            rec.t = t;
            rec.b = bonus;
            rec.q_before = qv;
            rec.reward = reward;
            rec.v_next = v_next;
            qv = (1.0 - alpha) * qv + alpha * (reward + v_next + bonus);
            rec.q_after = qv;
            rec.x_next = xn[0];
            if (collect_steps) res.steps.push_back(rec);
            ret += reward;
            x = xn;
            sel = nsel;
        }
        res.returns.push_back(ret);
    }

    for (int h = 1; h <= cfg.H; ++h) {
        std::vector<Ball> stage;
        stage.reserve(p.size());
        for (std::size_t b = 0; b < p.size(); ++b) {
            Ball ball;
            ball.id = static_cast<int>(b);
            ball.radius = p.epsilon;
            ball.ci = p.ci[b];
            ball.cj = p.cj[b];
            ball.cx = p.cx[b];
            ball.ca = p.ca[b];
            ball.q = p.q[h - 1][b];
            ball.count = p.count[h - 1][b];
            ball.selections = p.count[h - 1][b];
            stage.push_back(ball);
        }
        res.final_balls.push_back(std::move(stage));
    }
    return res;
}

}  // namespace aql::agent
