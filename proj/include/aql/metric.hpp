#pragma once

#include <cstddef>
#include <vector>

namespace aql::metric {

/// A point of the joint state-action space. Either part may be empty when a
/// function only cares about one of them (e.g. pure state sets).
struct Point {
    std::vector<double> state;
    std::vector<double> action;
};

enum class Kind {
    product_max,      // max(state sup-norm, action sup-norm)
    product_sum,      // state sup-norm + action sup-norm
    euclidean_joint,  // l2 norm on the concatenated coordinates
};

struct MetricSpec {
    Kind kind = Kind::product_max;
    double d_max = 1.0;  // diameter hint; root ball radius and scale unit
};

/// Sup-norm distance between two coordinate vectors of equal length.
double sup_distance(const std::vector<double>& a, const std::vector<double>& b);

/// Joint distance between two state-action points.
double distance(const MetricSpec& spec, const Point& a, const Point& b);

/// Distance induced on states: min over pairs from `action_sample` of the
/// joint distance. For the product kinds this equals the state term exactly
/// and the sample is not consulted.
double state_distance(const MetricSpec& spec,
                      const std::vector<double>& x,
                      const std::vector<double>& y,
                      const std::vector<std::vector<double>>& action_sample);

/// Max pairwise distance over a finite region. Empty region has diameter 0.
double diameter(const MetricSpec& spec, const std::vector<Point>& region);

/// Greedy r-net by farthest-point traversal, seeded at region.front().
/// Returns indices into `region`. The result is an r-packing (pairwise
/// distances >= r) whose open r-balls cover the region. Empty region -> empty.
std::vector<std::size_t> greedy_net(const std::vector<Point>& region, double r,
                                    const MetricSpec& spec);

struct PackingResult {
    long long count = 0;
    bool exact = false;  // false: greedy lower bound was used
};

/// Size of a maximum r-packing. Exhaustive (exact) when the region has at
/// most `exact_threshold` points, otherwise the greedy-net lower bound.
PackingResult packing_number(const std::vector<Point>& region, double r,
                             const MetricSpec& spec, std::size_t exact_threshold = 25);

/// True when the chosen indices are pairwise >= r apart.
bool is_packing(const std::vector<Point>& region, const std::vector<std::size_t>& chosen,
                double r, const MetricSpec& spec);

/// True when every region point lies strictly within r of a chosen point.
bool covers(const std::vector<Point>& region, const std::vector<std::size_t>& chosen,
            double r, const MetricSpec& spec);

}  // namespace aql::metric
