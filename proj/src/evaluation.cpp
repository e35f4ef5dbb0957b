#include <celluda/errors.hpp>
#include <celluda/evaluation.hpp>

#include <algorithm>
#include <limits>

namespace celluda {

double MatchResult::total_distance() const
{
    double s = 0.0;
    for (const auto& p : pairs) s += p.distance;
    return s;
}

std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost)
{
    // Shortest augmenting path Hungarian method with row/column potentials,
    // 1-based internally.
    const int n = static_cast<int>(cost.size());
    if (n == 0) return {};
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);

    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != 0);
    }

    std::vector<int> assignment(n, -1);
    for (int j = 1; j <= n; ++j)
        if (p[j] > 0) assignment[p[j] - 1] = j - 1;
    return assignment;
}

MatchResult match_points(const PointSet& dets, const PointSet& gt, double threshold)
{
    if (!(threshold > 0.0)) throw UsageError("match_points: threshold must be positive");

    const int nd = static_cast<int>(dets.size());
    const int ng = static_cast<int>(gt.size());
    MatchResult result;
    if (nd > 0 && ng > 0) {
        // Gated and padding entries cost more than any feasible sum of real
        // distances, so the optimum first maximises the number of real pairs.
        const int k = std::max(nd, ng);
        const double big = threshold * (std::min(nd, ng) + 1) + 1.0;
        std::vector<std::vector<double>> cost(k, std::vector<double>(k, big));
        for (int i = 0; i < nd; ++i) {
            for (int j = 0; j < ng; ++j) {
                const double d = distance(dets[i], gt[j]);
                if (d <= threshold) cost[i][j] = d;
            }
        }
        const auto assignment = solve_assignment(cost);
        for (int i = 0; i < nd; ++i) {
            const int j = assignment[i];
            if (j < 0 || j >= ng) continue;
            const double d = distance(dets[i], gt[j]);
            if (d <= threshold) result.pairs.push_back({i, j, d});
        }
    }
    result.tp = static_cast<int>(result.pairs.size());
    result.fp = nd - result.tp;
    result.fn = ng - result.tp;
    return result;
}

F1Score f1_score(const DetectionCounts& c)
{
    if (c.tp == 0 && c.fp == 0 && c.fn == 0) return {1.0, 1.0, 1.0};
    F1Score s;
    s.precision = (c.tp + c.fp) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    s.recall = (c.tp + c.fn) > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    s.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
    return s;
}

bool pseudo_label_correct(const PointSet& pseudo, const PointSet& gt, double threshold)
{
    const MatchResult m = match_points(pseudo, gt, threshold);
    return m.fp == 0 && m.fn == 0;
}

CountHistogram accuracy_by_cell_count(const std::vector<AuditedLabel>& labels, double threshold)
{
    CountHistogram hist;
    for (const auto& l : labels) {
        if (l.detected == nullptr || l.truth == nullptr)
            throw UsageError("accuracy_by_cell_count: missing detection or ground truth");
        auto& bucket = hist[static_cast<int>(l.detected->size())];
        ++bucket.total;
        if (pseudo_label_correct(*l.detected, *l.truth, threshold)) ++bucket.correct;
    }
    return hist;
}

} // namespace celluda
