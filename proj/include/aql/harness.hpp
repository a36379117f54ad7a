#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"

#include "aql/agent_adaptive.hpp"
#include "aql/agent_uniform.hpp"
#include "aql/diagnostics.hpp"

namespace aql::harness {

/// One experiment: an environment, an agent kind, K episodes per seed.
/// Mirrored one-to-one by the JSON config file and the CLI flags; flags
/// override file values.
struct ExperimentConfig {
    std::string env;
    std::string agent = "adaptive";  // "adaptive" or "uniform"
    long long episodes = 1000;
    int horizon = 0;  // 0 keeps the environment default
    double delta = 0.05;
    double lipschitz = -1.0;  // < 0 resolves to the environment hint
    double eps_grid = 1.0 / 512.0;  // oracle resolution
    double epsilon = 0.25;          // uniform-agent ball radius
    std::vector<std::uint64_t> seeds = {1};
    int max_depth = 10;
    std::string out_dir;
    bool svg = true;            // also emit the regret curve plot
    bool collect_steps = true;  // keep per-step records (episode log, checks)
};

/// Parse a config file's JSON object. Unknown keys are rejected so typos
/// surface as usage errors.
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

/// Throws invalid_input_error naming the offending field.
void validate_config(const ExperimentConfig& cfg);

/// Run every seed of the experiment and write, per seed S:
///   episodes_seedS.jsonl  one JSON record per (episode, stage) step
///   tree_seedS.json       final balls of every stage
///   summary_seedS.json    config echo, regret report, structural checks
///   regret_seedS.csv      k, start, vstar, return, regret, cumulative
///   regret_seedS.svg      cumulative regret curve (unless svg = false)
/// Returns the per-seed summaries in seed order.
std::vector<nlohmann::json> run_experiment(const ExperimentConfig& cfg);

/// Join two artifact directories (typically adaptive vs uniform on the same
/// environment and K) into compare.csv and compare.json under out_dir.
/// Throws invalid_input_error when env or K differ.
nlohmann::json compare(const std::string& a_dir, const std::string& b_dir,
                       const std::string& out_dir);

/// Zooming and covering profiles with dimension fits for every stage of the
/// named environment, at scales d_max * 2^-i for i = 1..scale_count.
/// Writes dims.json and dims.csv under out_dir and returns the report.
nlohmann::json dims(const std::string& env_name, int scale_count, double eps_grid,
                    const std::string& out_dir, int horizon_override = 0, double lipschitz = -1.0);

}  // namespace aql::harness
