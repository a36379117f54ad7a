#pragma once

#include <cstdint>
#include <vector>

#include "aql/agent_adaptive.hpp"

namespace aql::agent {

/// Fixed epsilon-net discretization of S x A: one ball geometry shared by all
/// stages, with per-stage optimistic q estimates and visit counts. Balls never
/// split, so per-ball counts are unbounded. Geometry is built once; run_uniform
/// works on a private copy, so one partition serves many seeded runs.
struct UniformPartition {
    MetricSpec spec;
    WitnessGrid grid;
    double epsilon = 0.0;
    int H = 1;
    std::vector<int> ci, cj;     // ball center witness indices, net order
    std::vector<double> cx, ca;  // ball center coordinates
    std::vector<std::vector<double>> q;         // [stage h-1][ball], init H
    std::vector<std::vector<long long>> count;  // [stage h-1][ball]
    // Per witness state index, the balls meeting the fiber {x} x A.
    std::vector<std::vector<int>> fiber;

    std::size_t size() const { return ci.size(); }
};

/// Greedy epsilon-net of the full witness grid; every ball has radius epsilon.
/// The net's covering property makes every fiber list non-empty.
UniformPartition build_uniform(double epsilon, const MetricSpec& spec, const WitnessGrid& grid,
                               int H);

/// Argmax of q over balls meeting the fiber of x, ties to the lower id. The
/// played action is always the ball's center action, which lies in the ball
/// for every state of its fiber. Throws invariant_violation_error when no
/// ball meets the fiber.
Selection select_uniform(const UniformPartition& partition, int h, double x);

/// Same episode loop and q update as the adaptive agent, splitting disabled.
RunResult run_uniform(const env::Environment& environment, const UniformPartition& partition,
                      const AgentConfig& cfg, std::uint64_t seed, bool collect_steps = true);

}  // namespace aql::agent
