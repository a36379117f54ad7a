#include "aql/metric.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>

#include "aql/errors.hpp"

namespace aql::metric {

double sup_distance(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size())
        throw invalid_input_error("sup_distance: coordinate dimension mismatch");
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

double distance(const MetricSpec& spec, const Point& a, const Point& b) {
    switch (spec.kind) {
        case Kind::product_max:
            return std::max(sup_distance(a.state, b.state), sup_distance(a.action, b.action));
        case Kind::product_sum:
            return sup_distance(a.state, b.state) + sup_distance(a.action, b.action);
        case Kind::euclidean_joint: {
            if (a.state.size() != b.state.size() || a.action.size() != b.action.size())
                throw invalid_input_error("distance: coordinate dimension mismatch");
            double s = 0.0;
            for (std::size_t i = 0; i < a.state.size(); ++i) {
                double d = a.state[i] - b.state[i];
                s += d * d;
            }
            for (std::size_t i = 0; i < a.action.size(); ++i) {
                double d = a.action[i] - b.action[i];
                s += d * d;
            }
            return std::sqrt(s);
        }
    }
    throw invalid_input_error("distance: unknown metric kind");
}

double state_distance(const MetricSpec& spec,
                      const std::vector<double>& x,
                      const std::vector<double>& y,
                      const std::vector<std::vector<double>>& action_sample) {
    if (spec.kind == Kind::product_max || spec.kind == Kind::product_sum)
        return sup_distance(x, y);  // min over action pairs is attained at equal actions
    if (action_sample.empty())
        throw invalid_input_error("state_distance: non-product metric needs an action sample");
    double best = -1.0;
    Point p{x, {}}, q{y, {}};
    for (const auto& a : action_sample) {
        p.action = a;
        for (const auto& b : action_sample) {
            q.action = b;
            double d = distance(spec, p, q);
            if (best < 0.0 || d < best) best = d;
        }
    }
    return best;
}

double diameter(const MetricSpec& spec, const std::vector<Point>& region) {
    double d = 0.0;
    for (std::size_t i = 0; i < region.size(); ++i)
        for (std::size_t j = i + 1; j < region.size(); ++j)
            d = std::max(d, distance(spec, region[i], region[j]));
    return d;
}

std::vector<std::size_t> greedy_net(const std::vector<Point>& region, double r,
                                    const MetricSpec& spec) {
    if (r <= 0.0) throw invalid_input_error("greedy_net: scale must be positive");
    std::vector<std::size_t> net;
    if (region.empty()) return net;

    net.push_back(0);
    // Candidates still uncovered (distance to net >= r), in input order, with
    // their current distance to the net. Covered points can never be picked
    // and cannot change the running max, so they are dropped as they appear.
    std::vector<std::size_t> alive;
    std::vector<double> dist;
    alive.reserve(region.size());
    dist.reserve(region.size());
    for (std::size_t i = 1; i < region.size(); ++i) {
        double d = distance(spec, region[i], region[0]);
        if (d >= r) {
            alive.push_back(i);
            dist.push_back(d);
        }
    }

    while (!alive.empty()) {
        std::size_t best = 0;
        for (std::size_t k = 1; k < alive.size(); ++k)
            if (dist[k] > dist[best]) best = k;  // ties keep the earliest index
        std::size_t chosen = alive[best];
        net.push_back(chosen);

        std::size_t w = 0;
        for (std::size_t k = 0; k < alive.size(); ++k) {
            if (alive[k] == chosen) continue;
            double d = std::min(dist[k], distance(spec, region[alive[k]], region[chosen]));
            if (d >= r) {
                alive[w] = alive[k];
                dist[w] = d;
                ++w;
            }
        }
        alive.resize(w);
        dist.resize(w);
    }
    return net;
}

namespace {

// Maximum independent set on the conflict graph (edges join pairs closer
// than r), by branch and bound. Feasible for the exact-mode size cap.
struct MisSolver {
    std::vector<std::uint32_t> adj;
    int best = 0;

    void solve(std::uint32_t avail, int current) {
        if (current + std::popcount(avail) <= best) return;
        if (avail == 0) {
            best = std::max(best, current);
            return;
        }
        // Branch on the available vertex with the most available conflicts.
        std::uint32_t rest = avail;
        int v = -1, vdeg = -1;
        while (rest) {
            int u = std::countr_zero(rest);
            rest &= rest - 1;
            int deg = std::popcount(adj[u] & avail);
            if (deg > vdeg) {
                vdeg = deg;
                v = u;
            }
        }
        std::uint32_t bit = std::uint32_t{1} << v;
        solve((avail & ~bit) & ~adj[v], current + 1);  // take v
        solve(avail & ~bit, current);                  // skip v
    }
};

}  // namespace

PackingResult packing_number(const std::vector<Point>& region, double r,
                             const MetricSpec& spec, std::size_t exact_threshold) {
    if (r <= 0.0) throw invalid_input_error("packing_number: scale must be positive");
    if (region.empty()) return {0, true};
    if (region.size() > exact_threshold || region.size() > 31) {
        auto net = greedy_net(region, r, spec);
        return {static_cast<long long>(net.size()), false};
    }
    const std::size_t n = region.size();
    MisSolver solver;
    solver.adj.assign(n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (distance(spec, region[i], region[j]) < r) {
                solver.adj[i] |= std::uint32_t{1} << j;
                solver.adj[j] |= std::uint32_t{1} << i;
            }
    std::uint32_t all = (n == 32) ? ~std::uint32_t{0} : ((std::uint32_t{1} << n) - 1);
    solver.solve(all, 0);
    return {solver.best, true};
}

bool is_packing(const std::vector<Point>& region, const std::vector<std::size_t>& chosen,
                double r, const MetricSpec& spec) {
    for (std::size_t i = 0; i < chosen.size(); ++i)
        for (std::size_t j = i + 1; j < chosen.size(); ++j)
            if (distance(spec, region[chosen[i]], region[chosen[j]]) < r) return false;
    return true;
}

bool covers(const std::vector<Point>& region, const std::vector<std::size_t>& chosen,
            double r, const MetricSpec& spec) {
    for (const auto& p : region) {
        bool hit = false;
        for (std::size_t c : chosen)
            if (distance(spec, p, region[c]) < r) {
                hit = true;
                break;
            }
        if (!hit) return false;
    }
    return true;
}

}  // namespace aql::metric
