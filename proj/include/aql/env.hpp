#pragma once

#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "aql/metric.hpp"
#include "aql/witness.hpp"

namespace aql::env {

using metric::MetricSpec;

/// One realized episode: the visited state, the played action and the reward
/// at every stage. `steps.size() == horizon` always holds after an episode.
struct Trajectory {
    struct Step {
        int h = 0;
        std::vector<double> x;
        std::vector<double> a;
        double reward = 0.0;
    };
    int episode = 0;
    std::vector<Step> steps;
    double ret = 0.0;  // sum of rewards
};

/// Episodic finite-horizon decision process on box state/action spaces.
/// Rewards are deterministic functions of (h, x, a); only the transition may
/// consume randomness, and it draws exclusively from the stream passed in.
class Environment {
  public:
    virtual ~Environment() = default;

    virtual std::string name() const = 0;
    virtual int horizon() const = 0;
    virtual MetricSpec metric() const = 0;
    virtual int state_dim() const { return 1; }
    virtual int action_dim() const { return 1; }
    virtual std::pair<double, double> state_bounds(int dim) const;
    virtual std::pair<double, double> action_bounds(int dim) const;

    /// Scripted initial state for episode k of a K-episode run (1-based k).
    virtual std::vector<double> reset(long long k, long long total_episodes) const = 0;

    virtual double reward(int h, const std::vector<double>& x,
                          const std::vector<double>& a) const = 0;

    /// Next state. Deterministic environments do not touch the stream.
    virtual std::vector<double> next_state(int h, const std::vector<double>& x,
                                           const std::vector<double>& a,
                                           std::mt19937_64& rng) const = 0;

    /// Reward and next state in one call. Validates stage range and that x
    /// and a lie inside the declared boxes.
    std::pair<double, std::vector<double>> step(int h, const std::vector<double>& x,
                                                const std::vector<double>& a,
                                                std::mt19937_64& rng) const;

    virtual bool deterministic_kernel() const { return true; }

    /// Analytic mean of the next-state kernel, for calibration of noisy
    /// environments. Deterministic environments return the next state.
    virtual std::vector<double> kernel_mean(int h, const std::vector<double>& x,
                                            const std::vector<double>& a) const;

    /// Upper bound on the Lipschitz constant of the optimal Q functions under
    /// the environment metric, from the construction's own constants.
    virtual double lipschitz_hint() const = 0;

    /// Witness grid sized so the spacing is at most half the smallest ball
    /// radius allowed by `max_depth` (radius floor d_max / 2^max_depth).
    grid::WitnessGrid make_witness_grid(int max_depth) const;

    /// States at which value tables are probed in tests and reports.
    virtual std::vector<double> probe_states() const { return {0.1, 0.3, 0.5, 0.7, 0.9}; }
};

/// Benchmark registry. Known names: line-bandit, band-mdp, flat-mdp,
/// needle-mdp, noisy-drift. `horizon_override` of 0 keeps the default.
std::unique_ptr<Environment> make_environment(const std::string& name, int horizon_override = 0);

/// The benchmark set that reports and the acceptance suite sweep over.
std::vector<std::string> shipped_environments();

}  // namespace aql::env
