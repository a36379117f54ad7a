#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "aql/errors.hpp"

namespace aql::grid {

/// Uniformly spaced closed interval [lo, hi] with n sample points.
struct Axis {
    double lo = 0.0;
    double hi = 1.0;
    int n = 2;

    double step() const { return (hi - lo) / (n - 1); }
    double at(int i) const { return lo + step() * i; }

    /// Nearest sample index, clamped to the axis. Half-way points round away
    /// from zero (llround), which keeps snapping deterministic.
    int snap(double v) const {
        long long i = std::llround((v - lo) / step());
        if (i < 0) i = 0;
        if (i >= n) i = n - 1;
        return static_cast<int>(i);
    }
};

/// Finite sample of the state and action spaces on which all set-level
/// computations (domains, relevance, nets, near-optimal sets) are evaluated.
/// One axis per coordinate; the grid is their cartesian product.
struct WitnessGrid {
    std::vector<Axis> state_axes;
    std::vector<Axis> action_axes;

    long long state_count() const {
        long long c = 1;
        for (const auto& a : state_axes) c *= a.n;
        return c;
    }
    long long action_count() const {
        long long c = 1;
        for (const auto& a : action_axes) c *= a.n;
        return c;
    }

    std::vector<double> state_at(long long idx) const { return unflatten(state_axes, idx); }
    std::vector<double> action_at(long long idx) const { return unflatten(action_axes, idx); }

    std::vector<double> snap_state(const std::vector<double>& x) const {
        return snap(state_axes, x);
    }
    long long snap_state_index(const std::vector<double>& x) const {
        return snap_index(state_axes, x);
    }
    long long snap_action_index(const std::vector<double>& a) const {
        return snap_index(action_axes, a);
    }

  private:
    static std::vector<double> unflatten(const std::vector<Axis>& axes, long long idx) {
        std::vector<double> out(axes.size());
        for (std::size_t d = axes.size(); d-- > 0;) {
            out[d] = axes[d].at(static_cast<int>(idx % axes[d].n));
            idx /= axes[d].n;
        }
        return out;
    }
    static std::vector<double> snap(const std::vector<Axis>& axes, const std::vector<double>& v) {
        if (v.size() != axes.size())
            throw invalid_input_error("WitnessGrid: coordinate dimension mismatch");
        std::vector<double> out(v.size());
        for (std::size_t d = 0; d < axes.size(); ++d) out[d] = axes[d].at(axes[d].snap(v[d]));
        return out;
    }
    static long long snap_index(const std::vector<Axis>& axes, const std::vector<double>& v) {
        if (v.size() != axes.size())
            throw invalid_input_error("WitnessGrid: coordinate dimension mismatch");
        long long idx = 0;
        for (std::size_t d = 0; d < axes.size(); ++d) idx = idx * axes[d].n + axes[d].snap(v[d]);
        return idx;
    }
};

}  // namespace aql::grid
