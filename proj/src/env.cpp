#include "aql/env.hpp"

#include <algorithm>
#include <cmath>

#include "aql/errors.hpp"

namespace aql::env {

namespace {

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Linear sweep of initial states over [0,1]: episode 1 starts at 0, episode K
// at 1. Exercises the whole state space regardless of the transition kernel.
std::vector<double> sweep_start(long long k, long long total) {
    if (total <= 1) return {0.5};
    return {static_cast<double>(k - 1) / static_cast<double>(total - 1)};
}

// Reward ridge used by band-mdp and noisy-drift: a tent of unit height around
// the line a*(x) = 0.25 + 0.5 x, scaled by w(x) = 0.5 + 0.5 x so that the
// continuation value genuinely depends on where the drift takes the state.
double band_reward(double x, double a) {
    double peak = 0.25 + 0.5 * x;
    double w = 0.5 + 0.5 * x;
    return w * std::max(0.0, 1.0 - 2.0 * std::abs(a - peak));
}

// Coordinate-wise Lipschitz bound for Q* via the backward recursion
//   LQx_h = Lr_x + LV_{h+1} * Lg_x,   LQa_h = Lr_a + LV_{h+1} * Lg_a,
//   LV_h = LQx_h.
// The declared constant is the worst per-coordinate slope across stages,
// matching how the slope estimator samples (one coordinate at a time).
double lipschitz_recursion(int H, double lr_x, double lr_a, double lg_x, double lg_a) {
    double lv = 0.0, worst = 0.0;
    for (int h = H; h >= 1; --h) {
        double lqx = lr_x + lv * lg_x;
        double lqa = lr_a + lv * lg_a;
        worst = std::max(worst, std::max(lqx, lqa));
        lv = lqx;
    }
    return worst;
}

class LineBandit final : public Environment {
  public:
    explicit LineBandit(int H) : H_(H) {}
    std::string name() const override { return "line-bandit"; }
    int horizon() const override { return H_; }
    MetricSpec metric() const override { return {metric::Kind::product_max, 1.0}; }
    std::vector<double> reset(long long k, long long total) const override {
        return sweep_start(k, total);
    }
    double reward(int, const std::vector<double>& x, const std::vector<double>& a) const override {
        return 1.0 - std::abs(a[0] - x[0]);
    }
    std::vector<double> next_state(int, const std::vector<double>& x,
                                   const std::vector<double>&, std::mt19937_64&) const override {
        return x;
    }
    double lipschitz_hint() const override { return lipschitz_recursion(H_, 1.0, 1.0, 1.0, 0.0); }

  private:
    int H_;
};

class BandMdp final : public Environment {
  public:
    explicit BandMdp(int H) : H_(H) {}
    std::string name() const override { return "band-mdp"; }
    int horizon() const override { return H_; }
    MetricSpec metric() const override { return {metric::Kind::product_max, 1.0}; }
    std::vector<double> reset(long long k, long long total) const override {
        return sweep_start(k, total);
    }
    double reward(int, const std::vector<double>& x, const std::vector<double>& a) const override {
        return band_reward(x[0], a[0]);
    }
    // Dyadic drift: grid states and actions map to exactly representable next
    // states, so nearest-cell lookups in the oracle never see rounding ties.
    std::vector<double> next_state(int, const std::vector<double>& x,
                                   const std::vector<double>& a, std::mt19937_64&) const override {
        return {clamp01(x[0] + 0.25 * (a[0] - 0.5))};
    }
    // d band_reward: |d/dx| <= 0.5 + 1*2*0.5 = 1.5, |d/da| <= 2. The grid
    // oracle reads the next state through a nearest-cell lookup, which moves
    // by at most one cell per cell in either coordinate, so the recursion
    // takes both transition slopes as 1.
    double lipschitz_hint() const override { return lipschitz_recursion(H_, 1.5, 2.0, 1.0, 1.0); }

  private:
    int H_;
};

class FlatMdp final : public Environment {
  public:
    explicit FlatMdp(int H) : H_(H) {}
    std::string name() const override { return "flat-mdp"; }
    int horizon() const override { return H_; }
    MetricSpec metric() const override { return {metric::Kind::product_max, 1.0}; }
    std::vector<double> reset(long long, long long) const override { return {0.5}; }
    double reward(int, const std::vector<double>&, const std::vector<double>&) const override {
        return 0.7;
    }
    std::vector<double> next_state(int, const std::vector<double>& x,
                                   const std::vector<double>& a, std::mt19937_64&) const override {
        return {clamp01(x[0] + 0.25 * (a[0] - 0.5))};
    }
    double lipschitz_hint() const override { return 0.0; }

  private:
    int H_;
};

class NeedleMdp final : public Environment {
  public:
    explicit NeedleMdp(int H) : H_(H) {}
    std::string name() const override { return "needle-mdp"; }
    int horizon() const override { return H_; }
    MetricSpec metric() const override { return {metric::Kind::product_max, 1.0}; }
    std::vector<double> reset(long long k, long long total) const override {
        return sweep_start(k, total);
    }
    double reward(int, const std::vector<double>& x, const std::vector<double>& a) const override {
        double d = std::max(std::abs(x[0] - 0.5), std::abs(a[0] - 0.5));
        return std::max(0.0, 1.0 - 4.0 * d);
    }
    std::vector<double> next_state(int, const std::vector<double>& x,
                                   const std::vector<double>&, std::mt19937_64&) const override {
        return x;
    }
    double lipschitz_hint() const override { return lipschitz_recursion(H_, 4.0, 4.0, 1.0, 0.0); }

  private:
    int H_;
};

// Test environment with a genuinely stochastic kernel whose mean is analytic:
// x' = (1 - gamma) x + gamma U with U uniform on [0,1], so the support never
// leaves the box and E[x'] = (1 - gamma) x + gamma / 2.
class NoisyDrift final : public Environment {
  public:
    explicit NoisyDrift(int H) : H_(H) {}
    std::string name() const override { return "noisy-drift"; }
    int horizon() const override { return H_; }
    MetricSpec metric() const override { return {metric::Kind::product_max, 1.0}; }
    std::vector<double> reset(long long, long long) const override { return {0.25}; }
    double reward(int, const std::vector<double>& x, const std::vector<double>& a) const override {
        return band_reward(x[0], a[0]);
    }
    std::vector<double> next_state(int, const std::vector<double>& x,
                                   const std::vector<double>&, std::mt19937_64& rng) const override {
        std::uniform_real_distribution<double> u(0.0, 1.0);
        return {(1.0 - kGamma) * x[0] + kGamma * u(rng)};
    }
    bool deterministic_kernel() const override { return false; }
    std::vector<double> kernel_mean(int, const std::vector<double>& x,
                                    const std::vector<double>&) const override {
        return {(1.0 - kGamma) * x[0] + kGamma * 0.5};
    }
    double lipschitz_hint() const override {
        return lipschitz_recursion(H_, 1.5, 2.0, 1.0 - kGamma, 0.0);
    }

  private:
    static constexpr double kGamma = 0.3;
    int H_;
};

}  // namespace

std::pair<double, double> Environment::state_bounds(int) const { return {0.0, 1.0}; }
std::pair<double, double> Environment::action_bounds(int) const { return {0.0, 1.0}; }

std::pair<double, std::vector<double>> Environment::step(int h, const std::vector<double>& x,
                                                         const std::vector<double>& a,
                                                         std::mt19937_64& rng) const {
    if (h < 1 || h > horizon()) throw invalid_input_error("step: stage out of range");
    if (static_cast<int>(x.size()) != state_dim() || static_cast<int>(a.size()) != action_dim())
        throw invalid_input_error("step: state/action dimension mismatch");
    for (int d = 0; d < state_dim(); ++d) {
        auto [lo, hi] = state_bounds(d);
        if (!(x[d] >= lo && x[d] <= hi)) throw invalid_input_error("step: state outside its box");
    }
    for (int d = 0; d < action_dim(); ++d) {
        auto [lo, hi] = action_bounds(d);
        if (!(a[d] >= lo && a[d] <= hi)) throw invalid_input_error("step: action outside its box");
    }
    return {reward(h, x, a), next_state(h, x, a, rng)};
}

std::vector<double> Environment::kernel_mean(int h, const std::vector<double>& x,
                                             const std::vector<double>& a) const {
    if (!deterministic_kernel())
        throw invalid_input_error("kernel_mean: stochastic environment must override");
    std::mt19937_64 unused(0);
    return next_state(h, x, a, unused);
}

grid::WitnessGrid Environment::make_witness_grid(int max_depth) const {
    if (max_depth < 0 || max_depth > 14)
        throw resource_limit_error("make_witness_grid: max_depth out of supported range [0,14]");
    int n = (1 << (max_depth + 1)) + 1;
    grid::WitnessGrid g;
    for (int d = 0; d < state_dim(); ++d) {
        auto [lo, hi] = state_bounds(d);
        g.state_axes.push_back({lo, hi, n});
    }
    for (int d = 0; d < action_dim(); ++d) {
        auto [lo, hi] = action_bounds(d);
        g.action_axes.push_back({lo, hi, n});
    }
    return g;
}

std::unique_ptr<Environment> make_environment(const std::string& name, int horizon_override) {
    int H = horizon_override;
    if (H < 0 || H > 50) throw invalid_input_error("make_environment: horizon out of range");
    if (name == "line-bandit") return std::make_unique<LineBandit>(H ? H : 1);
    if (name == "band-mdp") return std::make_unique<BandMdp>(H ? H : 3);
    if (name == "flat-mdp") return std::make_unique<FlatMdp>(H ? H : 2);
    if (name == "needle-mdp") return std::make_unique<NeedleMdp>(H ? H : 2);
    if (name == "noisy-drift") return std::make_unique<NoisyDrift>(H ? H : 2);
    throw invalid_input_error(
        "make_environment: unknown environment '" + name +
        "' (known: line-bandit, band-mdp, flat-mdp, needle-mdp, noisy-drift)");
}

std::vector<std::string> shipped_environments() {
    return {"line-bandit", "band-mdp", "flat-mdp", "needle-mdp"};
}

}  // namespace aql::env
