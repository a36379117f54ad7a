#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "aql/env.hpp"
#include "aql/errors.hpp"
#include "aql/oracle.hpp"
#include "doctest.h"

using namespace aql::env;
using aql::invalid_input_error;
using aql::resource_limit_error;

namespace {

// Two-state toy process with hand-solvable tables: x' = a deterministically,
// r = 0.5 a + 0.25 x. With H = 2: V2(x) = 0.25 x + 0.5, Q1(x,a) =
// 0.75 a + 0.25 x + 0.5, V1(x) = 0.25 x + 1.25.
class ToyTwoState final : public Environment {
  public:
    std::string name() const override { return "toy-two-state"; }
    int horizon() const override { return 2; }
    MetricSpec metric() const override { return {aql::metric::Kind::product_max, 1.0}; }
    std::vector<double> reset(long long, long long) const override { return {0.0}; }
    double reward(int, const std::vector<double>& x, const std::vector<double>& a) const override {
        return 0.5 * a[0] + 0.25 * x[0];
    }
    std::vector<double> next_state(int, const std::vector<double>&, const std::vector<double>& a,
                                   std::mt19937_64&) const override {
        return a;
    }
    double lipschitz_hint() const override { return 1.0; }
};

}  // namespace

TEST_CASE("registry: shipped set, overrides, unknown names") {
    CHECK(shipped_environments() ==
          std::vector<std::string>{"line-bandit", "band-mdp", "flat-mdp", "needle-mdp"});

    CHECK(make_environment("line-bandit")->horizon() == 1);
    CHECK(make_environment("band-mdp")->horizon() == 3);
    CHECK(make_environment("flat-mdp")->horizon() == 2);
    CHECK(make_environment("needle-mdp")->horizon() == 2);
    CHECK(make_environment("noisy-drift")->horizon() == 2);
    CHECK(make_environment("line-bandit", 4)->horizon() == 4);

    CHECK_THROWS_AS(make_environment("no-such-env"), invalid_input_error);
    CHECK_THROWS_AS(make_environment("line-bandit", -1), invalid_input_error);
    CHECK_THROWS_AS(make_environment("line-bandit", 51), invalid_input_error);
}

TEST_CASE("step: validation and composition") {
    auto env = make_environment("line-bandit", 2);
    std::mt19937_64 rng(1);

    CHECK_THROWS_AS(env->step(0, {0.5}, {0.5}, rng), invalid_input_error);
    CHECK_THROWS_AS(env->step(3, {0.5}, {0.5}, rng), invalid_input_error);
    CHECK_THROWS_AS(env->step(1, {1.5}, {0.5}, rng), invalid_input_error);
    CHECK_THROWS_AS(env->step(1, {0.5}, {-0.1}, rng), invalid_input_error);
    CHECK_THROWS_AS(env->step(1, {}, {0.5}, rng), invalid_input_error);
    CHECK_THROWS_AS(env->step(1, {0.5}, {0.2, 0.3}, rng), invalid_input_error);

    auto [r, xn] = env->step(1, {0.3}, {0.7}, rng);
    CHECK(r == doctest::Approx(0.6));
    CHECK(xn == std::vector<double>{0.3});
}

TEST_CASE("scripted starts: sweeps and fixed points") {
    auto line = make_environment("line-bandit");
    CHECK(line->reset(1, 11) == std::vector<double>{0.0});
    CHECK(line->reset(6, 11) == std::vector<double>{0.5});
    CHECK(line->reset(11, 11) == std::vector<double>{1.0});
    CHECK(line->reset(1, 1) == std::vector<double>{0.5});

    CHECK(make_environment("flat-mdp")->reset(3, 9) == std::vector<double>{0.5});
    CHECK(make_environment("noisy-drift")->reset(3, 9) == std::vector<double>{0.25});
}

TEST_CASE("reward and transition formulas at hand-checked points") {
    std::mt19937_64 rng(1);
    auto band = make_environment("band-mdp");
    CHECK(band->reward(1, {0.5}, {0.5}) == doctest::Approx(0.75));
    CHECK(band->reward(1, {0.0}, {0.25}) == doctest::Approx(0.5));
    CHECK(band->reward(1, {0.0}, {0.8}) == 0.0);  // outside the tent
    CHECK(band->next_state(1, {0.95}, {1.0}, rng) == std::vector<double>{1.0});  // clamped
    CHECK(band->next_state(1, {0.5}, {0.0}, rng)[0] == doctest::Approx(0.375));

    auto needle = make_environment("needle-mdp");
    CHECK(needle->reward(1, {0.5}, {0.5}) == doctest::Approx(1.0));
    CHECK(needle->reward(1, {0.5}, {0.75}) == 0.0);
    CHECK(needle->reward(1, {0.55}, {0.5}) == doctest::Approx(0.8));

    CHECK(make_environment("flat-mdp")->reward(2, {0.1}, {0.9}) == doctest::Approx(0.7));
    CHECK(make_environment("flat-mdp")->lipschitz_hint() == 0.0);
    CHECK(make_environment("line-bandit")->lipschitz_hint() == doctest::Approx(1.0));
}

TEST_CASE("witness grid: dyadic sizing and caps") {
    auto env = make_environment("line-bandit");
    auto g = env->make_witness_grid(3);
    REQUIRE(g.state_axes.size() == 1);
    CHECK(g.state_axes[0].n == 17);
    CHECK(g.action_axes[0].n == 17);
    CHECK(g.state_axes[0].lo == 0.0);
    CHECK(g.state_axes[0].hi == 1.0);
    CHECK(g.state_axes[0].step() == doctest::Approx(1.0 / 16.0));

    CHECK_THROWS_AS(env->make_witness_grid(15), resource_limit_error);
    CHECK_THROWS_AS(env->make_witness_grid(-1), resource_limit_error);
}

TEST_CASE("oracle: two-state toy tables match hand computation") {
    ToyTwoState toy;
    auto oracle = build_oracle(toy, 1.0);
    REQUIRE(oracle.H == 2);
    REQUIRE(oracle.state_cells() == 2);
    REQUIRE(oracle.action_cells() == 2);

    for (double x : {0.0, 1.0}) {
        CHECK(oracle.v_at(2, {x}) == doctest::Approx(0.25 * x + 0.5));
        CHECK(oracle.v_at(1, {x}) == doctest::Approx(0.25 * x + 1.25));
        for (double a : {0.0, 1.0}) {
            CHECK(oracle.q_at(2, {x}, {a}) == doctest::Approx(0.5 * a + 0.25 * x));
            CHECK(oracle.q_at(1, {x}, {a}) == doctest::Approx(0.75 * a + 0.25 * x + 0.5));
            CHECK(oracle.gap_at(1, {x}, {a}) == doctest::Approx(0.75 * (1.0 - a)));
        }
    }
    // Continuous queries snap to the nearest cell.
    CHECK(oracle.v_at(1, {0.4}) == doctest::Approx(1.25));
    CHECK(oracle.v_at(1, {0.6}) == doctest::Approx(1.5));
    CHECK_THROWS_AS(oracle.v_at(0, {0.0}), invalid_input_error);
    CHECK_THROWS_AS(oracle.v_at(3, {0.0}), invalid_input_error);
}

TEST_CASE("oracle: H = 1 tables reduce to the reward") {
    auto env = make_environment("line-bandit");
    auto oracle = build_oracle(*env, 1.0 / 64.0);
    for (double x : env->probe_states())
        for (double a : {0.0, 0.25, 0.5, 0.75, 1.0}) {
            // Snap the query so the reward is evaluated at the same cell.
            double xs = oracle.cells.state_at(oracle.cells.snap_state_index({x}))[0];
            double as = oracle.cells.action_at(oracle.cells.snap_action_index({a}))[0];
            CHECK(oracle.q_at(1, {x}, {a}) == doctest::Approx(env->reward(1, {xs}, {as})));
            CHECK(oracle.gap_at(1, {x}, {a}) >= 0.0);
        }
    // V* of the bandit is 1 everywhere: the diagonal action is on the grid.
    for (double x : env->probe_states()) CHECK(oracle.v_at(1, {x}) == doctest::Approx(1.0));
}

TEST_CASE("oracle: Bellman self-consistency on deterministic environments") {
    for (const char* name : {"band-mdp", "flat-mdp"}) {
        auto env = make_environment(name);
        auto oracle = build_oracle(*env, 1.0 / 64.0);
        const long long S = oracle.state_cells(), A = oracle.action_cells();
        std::mt19937_64 rng(0);
        double worst = 0.0;
        for (int h = 1; h <= oracle.H; ++h)
            for (long long s = 0; s < S; ++s)
                for (long long a = 0; a < A; ++a) {
                    auto x = oracle.cells.state_at(s);
                    auto act = oracle.cells.action_at(a);
                    double want = env->reward(h, x, act);
                    if (h < oracle.H) {
                        auto xn = env->next_state(h, x, act, rng);
                        want += oracle.v[h][oracle.cells.snap_state_index(xn)];
                    }
                    worst = std::max(worst, std::abs(oracle.q[h - 1][s * A + a] - want));
                }
        CHECK(worst <= 1e-12);
    }
}

TEST_CASE("oracle: refinement moves values by at most a grid step's worth") {
    auto env = make_environment("band-mdp");
    auto coarse = build_oracle(*env, 1.0 / 64.0);
    auto fine = build_oracle(*env, 1.0 / 128.0);
    double cap = 4.0 * env->horizon() * env->lipschitz_hint() * (1.0 / 64.0);
    for (double x : env->probe_states())
        for (int h = 1; h <= env->horizon(); ++h)
            CHECK(std::abs(coarse.v_at(h, {x}) - fine.v_at(h, {x})) <= cap);
}

TEST_CASE("oracle: cell cap guards table size") {
    auto env = make_environment("band-mdp");
    OracleOptions opt;
    opt.cell_cap = 100;
    CHECK_THROWS_AS(build_oracle(*env, 1.0 / 64.0, opt), resource_limit_error);
}

TEST_CASE("noisy-drift: kernel mean is analytic and empirically calibrated") {
    auto env = make_environment("noisy-drift");
    CHECK_FALSE(env->deterministic_kernel());
    CHECK(env->kernel_mean(1, {0.6}, {0.3}) == std::vector<double>{0.7 * 0.6 + 0.3 * 0.5});

    std::mt19937_64 rng(99);
    const int N = 20000;
    double acc = 0.0;
    for (int i = 0; i < N; ++i) acc += env->next_state(1, {0.6}, {0.3}, rng)[0];
    double se = 0.3 * std::sqrt(1.0 / 12.0) / std::sqrt(static_cast<double>(N));
    CHECK(std::abs(acc / N - 0.57) <= 3.0 * se);

    // Deterministic environments answer through the transition itself.
    auto flat = make_environment("flat-mdp");
    CHECK(flat->kernel_mean(1, {0.5}, {1.0}) == std::vector<double>{0.625});
}

TEST_CASE("lipschitz estimate: examples and hint consistency") {
    auto flat = make_environment("flat-mdp");
    auto oflat = build_oracle(*flat, 1.0 / 64.0);
    auto eflat = estimate_lipschitz(oflat, *flat);
    CHECK(eflat.q_slope <= 1e-12);
    CHECK(eflat.v_slope <= 1e-12);

    auto line = make_environment("line-bandit");
    auto oline = build_oracle(*line, 1.0 / 64.0);
    auto eline = estimate_lipschitz(oline, *line);
    CHECK(eline.q_slope == doctest::Approx(1.0));

    for (const auto& name : shipped_environments()) {
        auto env = make_environment(name);
        auto oracle = build_oracle(*env, 1.0 / 64.0);
        auto est = estimate_lipschitz(oracle, *env);
        CHECK(est.q_slope <= env->lipschitz_hint() * 1.000001 + 1e-9);
    }
}
