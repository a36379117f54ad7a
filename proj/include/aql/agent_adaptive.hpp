#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "aql/env.hpp"
#include "aql/metric.hpp"
#include "aql/witness.hpp"

namespace aql::agent {

using grid::WitnessGrid;
using metric::MetricSpec;

struct AgentConfig {
    int H = 1;
    long long episodes = 1;  // K; enters the bonus through log(4 H K / delta)
    double delta = 0.05;
    double lipschitz = -1.0;  // < 0 resolves to the environment's hint at run start
    double d_max = 1.0;
    int max_depth = 10;        // radius floor d_max / 2^max_depth; deeper splits are refused
    bool verify_splits = true; // re-check packing/covering of every split against the witness grid
};

/// alpha_t = (H + 1) / (H + t).
double learning_rate(long long t, int H);

/// b_t = 2 sqrt(H^3 log(4 H K / delta) / t) + 4 L d_max / sqrt(t). Natural log.
double exploration_bonus(long long t, const AgentConfig& cfg);

/// One ball of a stage partition. Centers sit on the witness lattice; `ci`
/// and `cj` are the state/action witness indices of the center, `cx`/`ca`
/// the corresponding coordinates. Radius is d_max / 2^depth.
struct Ball {
    int id = 0;
    int parent = -1;
    int depth = 0;
    double radius = 1.0;
    int ci = 0, cj = 0;
    double cx = 0.0, ca = 0.0;
    double q = 0.0;
    long long count = 0;       // inherited + own selections
    long long inherited = 0;   // count copied from the parent at creation
    long long selections = 0;  // own selections only
    bool active = true;
    long long created_episode = 0;
    std::vector<int> children;
};

struct StepRecord {
    long long episode = 0;
    int h = 0;
    int ball = 0;
    double radius = 0.0;
    long long t = 0;  // ball count after the increment; the update used this t
    double b = 0.0;
    double q_before = 0.0;
    double q_after = 0.0;
    double reward = 0.0;
    double v_next = 0.0;
    double x = 0.0;   // state the environment was in
    double xs = 0.0;  // witness-snapped state the partition was queried with
    double a = 0.0;
    double x_next = 0.0;
    int split_children = 0;  // children created right after this update
};

struct Selection {
    int ball = -1;
    int action_index = -1;
    double action = 0.0;
    double q = 0.0;  // q of the selected ball at selection time
};

/// Adaptive partition of one stage's state-action space into balls with
/// domains. All set-level queries are evaluated on the witness grid; public
/// entry points snap their state argument to it first. Limited to 1-d state
/// and action coordinates with equal witness spacing, which covers every
/// shipped environment.
class PartitionTree {
  public:
    PartitionTree(int stage, const MetricSpec& spec, const WitnessGrid& grid,
                  const AgentConfig& cfg);

    /// Ids of active balls whose domain meets the fiber {x} x A, ascending.
    std::vector<int> relevant(double x) const;

    /// Argmax of q over relevant balls; ties prefer the smaller radius, then
    /// the lower id. Throws invariant_violation_error when nothing is
    /// relevant (the active domains must cover the witness grid).
    int select_ball(double x) const;

    /// Center action when (x, center action) lies in the ball's domain, else
    /// the witness action closest to the center that does.
    double choose_action(int ball_id, double x) const;

    /// min(H, max q over relevant balls).
    double value_estimate(double x) const;

    /// Selection pipeline in one pass over the fiber.
    Selection select(double x) const;

    /// Witness points (state index, action index) of dom(ball): inside the
    /// ball, not inside any active ball of strictly smaller radius.
    std::vector<std::pair<int, int>> domain_points(int ball_id) const;

    /// count += 1, then q <- (1-alpha_t) q + alpha_t (reward + v_next + b_t).
    /// Fills the arithmetic fields of `rec`.
    void update(int ball_id, double reward, double v_next, long long episode, StepRecord& rec);

    /// Split when count >= (d_max/r)^2 and the depth cap allows: children on
    /// an (r/2)-net of dom(ball), inheriting q and count. Returns the number
    /// of children created (0 if no split happened).
    int try_split(int ball_id, long long episode);

    const std::vector<Ball>& balls() const { return balls_; }
    int stage() const { return stage_; }
    const MetricSpec& metric_spec() const { return spec_; }
    const AgentConfig& config() const { return cfg_; }
    const WitnessGrid& witness() const { return grid_; }
    int deepest() const { return deepest_; }
    long long splits() const { return splits_; }

    /// Witness spacing in coordinate units.
    double spacing() const { return step_; }

  private:
    struct FiberEntry {
        int id;
        int best_j;  // in-domain witness action closest to the center
    };

    template <typename Fn>
    void scan_fiber(int si, Fn&& per_ball) const;  // per_ball(const Ball&, int best_j)

    bool ball_contains(const Ball& b, int i, int j) const;
    bool owned_by_smaller(int i, int j, int depth) const;
    int half_width(int depth) const { return 1 << (log2_span_ - depth); }
    int snap_state(double x) const;
    void bucket_insert(const Ball& b);

    int stage_;
    MetricSpec spec_;
    WitnessGrid grid_;
    AgentConfig cfg_;
    int scount_, acount_;
    double slo_, alo_, step_;
    int log2_span_;  // d_max in witness-spacing units: d_max / step_ == 2^log2_span_
    std::vector<Ball> balls_;
    // Per depth, balls bucketed by state-index cell of width half_width(depth).
    std::vector<std::vector<std::vector<int>>> buckets_;
    int deepest_ = 0;
    long long splits_ = 0;
    mutable std::vector<std::uint32_t> stamp_;
    mutable std::uint32_t epoch_ = 0;
};

/// Full run artifacts of one seeded run of either agent.
struct RunResult {
    std::string env_name;
    std::string agent_kind;  // "adaptive" or "uniform"
    AgentConfig cfg;
    std::uint64_t seed = 0;
    double epsilon = 0.0;  // uniform agent only
    std::vector<StepRecord> steps;
    std::vector<double> returns;               // one per episode
    std::vector<std::vector<double>> starts;   // x_1 per episode
    std::vector<std::vector<Ball>> final_balls;  // per stage
};

struct RunOptions {
    bool collect_steps = true;
    /// Called after every episode with the per-stage trees.
    std::function<void(long long k, const std::vector<PartitionTree>&)> on_episode;
};

RunResult run_adaptive(const env::Environment& environment, const AgentConfig& cfg,
                       std::uint64_t seed, const RunOptions& options = {});

}  // namespace aql::agent
