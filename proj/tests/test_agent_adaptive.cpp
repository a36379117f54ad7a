#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "aql/agent_adaptive.hpp"
#include "aql/env.hpp"
#include "aql/errors.hpp"
#include "doctest.h"

using namespace aql::agent;
using aql::invalid_input_error;
using aql::invariant_violation_error;

namespace {

AgentConfig tree_cfg() {
    AgentConfig cfg;
    cfg.H = 2;
    cfg.episodes = 10;
    cfg.delta = 0.05;
    cfg.lipschitz = 1.0;
    cfg.d_max = 1.0;
    cfg.max_depth = 4;
    return cfg;
}

aql::grid::WitnessGrid square_grid(int n) {
    aql::grid::WitnessGrid g;
    g.state_axes.push_back({0.0, 1.0, n});
    g.action_axes.push_back({0.0, 1.0, n});
    return g;
}

// Update with reward = -b_t so the target r + v + b_t is exactly zero; every
// ball's q collapses to 0.0 and stays there, making tie-break behavior exact.
void zero_update(PartitionTree& tree, int ball, long long episode) {
    StepRecord rec;
    long long t = tree.balls()[ball].count + 1;
    double b = exploration_bonus(t, tree.config());
    tree.update(ball, -b, 0.0, episode, rec);
    REQUIRE(rec.q_after == 0.0);
}

// Random select/update/split rounds; with verify_splits on, any packing or
// covering defect in a split throws out of the loop.
void drive(PartitionTree& tree, int rounds, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const auto& ax = tree.witness().state_axes[0];
    for (int k = 1; k <= rounds; ++k) {
        double x = ax.at(static_cast<int>(rng() % ax.n));
        auto sel = tree.select(x);
        StepRecord rec;
        tree.update(sel.ball, 0.5, 0.0, k, rec);
        tree.try_split(sel.ball, k);
    }
}

}  // namespace

TEST_CASE("learning_rate: formula, monotonicity, validation") {
    CHECK(learning_rate(1, 1) == 1.0);
    CHECK(learning_rate(1, 7) == 1.0);
    CHECK(learning_rate(5, 3) == doctest::Approx(0.5));
    for (long long t = 1; t < 50; ++t) CHECK(learning_rate(t, 3) > learning_rate(t + 1, 3));
    CHECK_THROWS_AS(learning_rate(0, 3), invalid_input_error);
    CHECK_THROWS_AS(learning_rate(3, 0), invalid_input_error);
}

TEST_CASE("exploration_bonus: frozen value, scaling, validation") {
    AgentConfig cfg;
    cfg.H = 2;
    cfg.episodes = 4;
    cfg.delta = 0.5;
    cfg.lipschitz = 1.0;
    cfg.d_max = 1.0;

    // 2 sqrt(8 ln 64) + 4, pinned numerically.
    CHECK(exploration_bonus(1, cfg) == doctest::Approx(15.536215).epsilon(1e-6));
    CHECK(exploration_bonus(1, cfg) ==
          doctest::Approx(2.0 * std::sqrt(8.0 * std::log(64.0)) + 4.0));

    // Both terms scale as 1/sqrt(t).
    for (long long t : {1, 3, 10, 77})
        CHECK(exploration_bonus(4 * t, cfg) ==
              doctest::Approx(exploration_bonus(t, cfg) / 2.0).epsilon(1e-12));

    // With L = 0 only the Hoeffding term remains.
    AgentConfig nolip = cfg;
    nolip.lipschitz = 0.0;
    CHECK(exploration_bonus(9, nolip) ==
          doctest::Approx(2.0 * std::sqrt(8.0 * std::log(64.0) / 9.0)));

    CHECK_THROWS_AS(exploration_bonus(0, cfg), invalid_input_error);
    AgentConfig bad = cfg;
    bad.lipschitz = -1.0;
    CHECK_THROWS_AS(exploration_bonus(1, bad), invalid_input_error);
    bad = cfg;
    bad.delta = 0.0;
    CHECK_THROWS_AS(exploration_bonus(1, bad), invalid_input_error);
    bad = cfg;
    bad.delta = 1.0;
    CHECK_THROWS_AS(exploration_bonus(1, bad), invalid_input_error);
}

TEST_CASE("partition tree: construction and input validation") {
    auto cfg = tree_cfg();
    PartitionTree tree(1, {aql::metric::Kind::product_max, 1.0}, square_grid(33), cfg);

    const auto& root = tree.balls()[0];
    CHECK(tree.balls().size() == 1);
    CHECK(root.depth == 0);
    CHECK(root.radius == 1.0);
    CHECK(root.ci == 16);
    CHECK(root.cj == 16);
    CHECK(root.q == 2.0);
    CHECK(tree.spacing() == doctest::Approx(1.0 / 32.0));
    CHECK(tree.relevant(0.0) == std::vector<int>{0});
    CHECK(tree.relevant(1.0) == std::vector<int>{0});
    CHECK(tree.select_ball(0.7) == 0);
    CHECK(tree.select(0.7).action == 0.5);  // root center action
    CHECK(tree.value_estimate(0.7) == 2.0);

    // Mismatched state/action spacing.
    aql::grid::WitnessGrid uneven = square_grid(33);
    uneven.action_axes[0].n = 17;
    CHECK_THROWS_AS(PartitionTree(1, {aql::metric::Kind::product_max, 1.0}, uneven, cfg),
                    invalid_input_error);

    // Witness spacing too coarse for the requested depth cap.
    auto coarse_cfg = cfg;
    coarse_cfg.max_depth = 5;
    CHECK_THROWS_AS(
        PartitionTree(1, {aql::metric::Kind::product_max, 1.0}, square_grid(33), coarse_cfg),
        invalid_input_error);

    // d_max that is not a power-of-two multiple of the spacing.
    CHECK_THROWS_AS(PartitionTree(1, {aql::metric::Kind::product_max, 0.75}, square_grid(33), cfg),
                    invalid_input_error);

    CHECK_THROWS_AS(tree.domain_points(99), invalid_input_error);
    StepRecord rec;
    CHECK_THROWS_AS(tree.update(99, 0.0, 0.0, 1, rec), invalid_input_error);
}

TEST_CASE("partition tree: root split geometry on the product-max square") {
    auto cfg = tree_cfg();
    PartitionTree tree(1, {aql::metric::Kind::product_max, 1.0}, square_grid(33), cfg);

    CHECK(tree.domain_points(0).size() == 33 * 33);
    zero_update(tree, 0, 1);
    const auto& root = tree.balls()[0];
    CHECK(root.count == 1);
    CHECK(root.selections == 1);
    CHECK(root.inherited == 0);

    // Count threshold (d_max/r)^2 = 1 is met: one update splits the root.
    CHECK(tree.try_split(0, 1) == 9);
    CHECK(tree.splits() == 1);
    CHECK(tree.deepest() == 1);
    CHECK_FALSE(tree.balls()[0].active);
    CHECK(tree.balls()[0].children == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 9});

    // Farthest-point traversal from the first domain point visits the corners
    // and then the central cross, all ties resolved in grid order.
    const std::pair<int, int> centers[] = {{0, 0},  {0, 32}, {32, 0},  {32, 32}, {0, 16},
                                           {16, 0}, {16, 16}, {16, 32}, {32, 16}};
    for (int id = 1; id <= 9; ++id) {
        const auto& b = tree.balls()[id];
        CHECK(b.ci == centers[id - 1].first);
        CHECK(b.cj == centers[id - 1].second);
        CHECK(b.depth == 1);
        CHECK(b.radius == 0.5);
        CHECK(b.parent == 0);
        CHECK(b.inherited == 1);
        CHECK(b.count == 1);
        CHECK(b.selections == 0);
        CHECK(b.q == 0.0);
        CHECK(b.created_episode == 1);
    }

    // Still-inactive balls reject updates and splits.
    StepRecord rec;
    CHECK_THROWS_AS(tree.update(0, 0.0, 0.0, 2, rec), invariant_violation_error);
    CHECK_THROWS_AS(tree.try_split(0, 2), invariant_violation_error);

    // Children below the count threshold never split.
    CHECK(tree.try_split(5, 2) == 0);

    // Equal q everywhere: relevance and selection at x = 0.25 (witness 8).
    CHECK(tree.relevant(0.25) == std::vector<int>{1, 2, 5, 6, 7, 8});
    CHECK(tree.select_ball(0.25) == 1);  // equal q, equal depth: lowest id
    CHECK(tree.select(0.25).action == 0.0);
    CHECK(tree.value_estimate(0.25) == 0.0);
}

TEST_CASE("partition tree: ownership, action choice, and radius-first ties") {
    auto cfg = tree_cfg();
    PartitionTree tree(1, {aql::metric::Kind::product_max, 1.0}, square_grid(33), cfg);
    zero_update(tree, 0, 1);
    REQUIRE(tree.try_split(0, 1) == 9);

    // Ball 1 sits at the corner (0,0); three more visits reach the depth-1
    // threshold (d_max/r)^2 = 4 and split it into the four corner quarters.
    for (int i = 0; i < 3; ++i) zero_update(tree, 1, 2);
    CHECK(tree.balls()[1].count == 4);
    REQUIRE(tree.try_split(1, 2) == 4);
    const std::pair<int, int> sub[] = {{0, 0}, {0, 15}, {15, 0}, {15, 15}};
    for (int id = 10; id <= 13; ++id) {
        const auto& b = tree.balls()[id];
        CHECK(b.ci == sub[id - 10].first);
        CHECK(b.cj == sub[id - 10].second);
        CHECK(b.depth == 2);
        CHECK(b.radius == 0.25);
        CHECK(b.inherited == 4);  // exactly (1/4)(d_max/r)^2 = 4
        CHECK(b.created_episode == 2);
    }

    // Fiber x = 0: depth-2 balls 10 and 11 own actions [0, 22/32]; the
    // depth-1 balls 5 and 2 survive only on the leftover action range.
    CHECK(tree.relevant(0.0) == std::vector<int>{2, 5, 10, 11});

    // All q are exactly 0: the smaller radius must win even against lower ids.
    CHECK(tree.select_ball(0.0) == 10);

    // Ball 5's center action (16) is owned by ball 11; the nearest in-domain
    // action is witness 23 (the low side, 9, is owned too).
    CHECK(tree.choose_action(5, 0.0) == doctest::Approx(23.0 / 32.0));
    CHECK(tree.choose_action(2, 0.0) == 1.0);
    CHECK_THROWS_AS(tree.choose_action(12, 0.0), invariant_violation_error);

    // dom(ball 11) is its full slice: no deeper balls exist.
    CHECK(tree.domain_points(11).size() == 8 * 15);
    // dom(ball 5) excludes points owned by the depth-2 generation.
    auto dom5 = tree.domain_points(5);
    auto has = [&](int i, int j) {
        return std::find(dom5.begin(), dom5.end(), std::make_pair(i, j)) != dom5.end();
    };
    CHECK(has(0, 23));
    CHECK(has(12, 31));
    CHECK_FALSE(has(0, 16));  // owned by ball 11
    CHECK_FALSE(has(8, 8));   // owned by ball 13

    // One fiber away from the sub-split, ownership shifts accordingly.
    CHECK(tree.relevant(0.25) == std::vector<int>{2, 5, 7, 8, 12, 13});
}

TEST_CASE("partition tree: update arithmetic matches the recursion") {
    auto cfg = tree_cfg();
    PartitionTree tree(1, {aql::metric::Kind::product_max, 1.0}, square_grid(33), cfg);

    StepRecord rec;
    tree.update(0, 0.3, 0.7, 1, rec);
    CHECK(rec.t == 1);
    CHECK(rec.episode == 1);
    CHECK(rec.q_before == 2.0);
    CHECK(rec.b == doctest::Approx(exploration_bonus(1, cfg)));
    // alpha_1 = 1 erases the initialization entirely.
    CHECK(rec.q_after == doctest::Approx(0.3 + 0.7 + rec.b));

    double rewards[] = {0.1, 0.9, 0.4};
    double vnexts[] = {0.2, 0.0, 1.3};
    for (int i = 0; i < 3; ++i) {
        double before = tree.balls()[0].q;
        tree.update(0, rewards[i], vnexts[i], 2, rec);
        double alpha = learning_rate(rec.t, cfg.H);
        CHECK(rec.q_before == before);
        CHECK(rec.t == i + 2);
        CHECK(rec.q_after ==
              doctest::Approx((1.0 - alpha) * before + alpha * (rewards[i] + vnexts[i] + rec.b))
                  .epsilon(1e-15));
    }
}

TEST_CASE("partition tree: random drive keeps every metric kind selectable") {
    const aql::metric::MetricSpec specs[] = {{aql::metric::Kind::product_max, 1.0},
                                             {aql::metric::Kind::product_sum, 2.0},
                                             {aql::metric::Kind::euclidean_joint, 2.0}};
    for (const auto& spec : specs) {
        auto cfg = tree_cfg();
        cfg.max_depth = 3;
        cfg.d_max = spec.d_max;
        PartitionTree tree(1, spec, square_grid(17), cfg);
        drive(tree, 300, 2024);  // verify_splits is on: bad splits would throw
        const auto& ax = tree.witness().state_axes[0];
        for (int i = 0; i < ax.n; ++i) CHECK_NOTHROW(tree.select(ax.at(i)));
        CHECK(tree.splits() >= 1);
    }
}

TEST_CASE("run_adaptive: two-stage trace on the line bandit") {
    auto env = aql::env::make_environment("line-bandit", 2);
    AgentConfig cfg;
    cfg.episodes = 3;
    cfg.delta = 0.05;
    cfg.max_depth = 3;

    auto run = run_adaptive(*env, cfg, 7);
    CHECK(run.env_name == "line-bandit");
    CHECK(run.agent_kind == "adaptive");
    CHECK(run.cfg.H == 2);
    CHECK(run.cfg.lipschitz == env->lipschitz_hint());
    REQUIRE(run.steps.size() == 6);
    REQUIRE(run.returns.size() == 3);
    REQUIRE(run.final_balls.size() == 2);

    CHECK(run.starts[0] == std::vector<double>{0.0});
    CHECK(run.starts[1] == std::vector<double>{0.5});
    CHECK(run.starts[2] == std::vector<double>{1.0});

    for (int k = 0; k < 3; ++k) {
        const auto& s1 = run.steps[2 * k];
        const auto& s2 = run.steps[2 * k + 1];
        CHECK(s1.episode == k + 1);
        CHECK(s2.episode == k + 1);
        CHECK(s1.h == 1);
        CHECK(s2.h == 2);
        // The line bandit never moves the state, and sweep starts lie on the
        // witness grid, so observed and snapped states agree.
        CHECK(s1.x == s1.xs);
        CHECK(s1.x_next == s1.x);
        CHECK(s2.x == s1.x);
        // Terminal stage: no continuation value.
        CHECK(s2.v_next == 0.0);
        // Stage-1 continuation is the next stage's pre-update estimate.
        CHECK(s1.v_next == std::min(2.0, s2.q_before));
        CHECK(run.returns[k] ==
              doctest::Approx((1.0 - std::abs(s1.a - s1.x)) + (1.0 - std::abs(s2.a - s2.x))));
    }

    // Episode 1 visits the roots (q = H ties resolve to the root's center
    // action 0.5) and splits both of them.
    CHECK(run.steps[0].a == 0.5);
    CHECK(run.steps[0].split_children == 9);
    CHECK(run.steps[1].split_children == 9);
    for (const auto& stage : run.final_balls) {
        CHECK(stage.size() == 10);
        CHECK_FALSE(stage[0].active);
    }

    AgentConfig bad = cfg;
    bad.episodes = 0;
    CHECK_THROWS_AS(run_adaptive(*env, bad, 1), invalid_input_error);
}

TEST_CASE("run_adaptive: deterministic replay and run options") {
    auto env = aql::env::make_environment("band-mdp");
    AgentConfig cfg;
    cfg.episodes = 40;
    cfg.max_depth = 5;

    auto a = run_adaptive(*env, cfg, 123);
    auto b = run_adaptive(*env, cfg, 123);
    REQUIRE(a.steps.size() == b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
        CHECK(a.steps[i].ball == b.steps[i].ball);
        CHECK(a.steps[i].a == b.steps[i].a);
        CHECK(a.steps[i].q_after == b.steps[i].q_after);
        CHECK(a.steps[i].x_next == b.steps[i].x_next);
    }
    CHECK(a.returns == b.returns);

    // Seeds only matter through the environment's noise: the band MDP is
    // deterministic, so a different seed replays the same trajectory. A
    // stochastic kernel separates seeds.
    auto c = run_adaptive(*env, cfg, 124);
    CHECK(a.returns == c.returns);
    auto noisy = aql::env::make_environment("noisy-drift");
    auto n1 = run_adaptive(*noisy, cfg, 123);
    auto n2 = run_adaptive(*noisy, cfg, 124);
    bool identical = n1.returns == n2.returns;
    CHECK_FALSE(identical);

    long long calls = 0;
    RunOptions opt;
    opt.collect_steps = false;
    opt.on_episode = [&](long long k, const std::vector<PartitionTree>& trees) {
        ++calls;
        CHECK(trees.size() == 3);
        CHECK(k == calls);
    };
    auto d = run_adaptive(*env, cfg, 123, opt);
    CHECK(calls == cfg.episodes);
    CHECK(d.steps.empty());
    CHECK(d.returns == a.returns);
}
