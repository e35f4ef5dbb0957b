#pragma once

#include <celluda/point_set.hpp>

#include <map>
#include <vector>

namespace celluda {

inline constexpr double kDefaultMatchThreshold = 10.0;

struct MatchPair
{
    int det_index = 0;
    int gt_index = 0;
    double distance = 0.0;
};

struct MatchResult
{
    std::vector<MatchPair> pairs;
    int tp = 0;
    int fp = 0;
    int fn = 0;

    double total_distance() const;
};

/// One-to-one detection/ground-truth assignment. Among assignments using
/// only pairs with distance <= threshold it maximises the number of pairs,
/// then minimises their summed distance (Hungarian method on a gated cost
/// matrix). Deterministic.
MatchResult match_points(const PointSet& dets, const PointSet& gt, double threshold = kDefaultMatchThreshold);

/// Square linear assignment: returns col index per row minimising total cost.
std::vector<int> solve_assignment(const std::vector<std::vector<double>>& cost);

struct DetectionCounts
{
    long tp = 0;
    long fp = 0;
    long fn = 0;

    DetectionCounts& operator+=(const DetectionCounts& o)
    {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        return *this;
    }
};

inline DetectionCounts counts_of(const MatchResult& m) { return {m.tp, m.fp, m.fn}; }

struct F1Score
{
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// precision = tp/(tp+fp), recall = tp/(tp+fn), f1 = 2tp/(2tp+fp+fn).
/// Vanishing denominators give 0, except the empty scene (all zero) which
/// scores 1 on every metric.
F1Score f1_score(const DetectionCounts& c);
inline F1Score f1_score(const MatchResult& m) { return f1_score(counts_of(m)); }

/// True iff the gated matching has no false positive and no false negative.
bool pseudo_label_correct(const PointSet& pseudo, const PointSet& gt, double threshold = kDefaultMatchThreshold);

struct CountBucket
{
    int total = 0;
    int correct = 0;
    double rate() const { return total > 0 ? static_cast<double>(correct) / total : 0.0; }
};

/// Correctness rate keyed by detected-cell count; empty buckets are absent.
using CountHistogram = std::map<int, CountBucket>;

struct AuditedLabel
{
    const PointSet* detected = nullptr;
    const PointSet* truth = nullptr;
};

CountHistogram accuracy_by_cell_count(const std::vector<AuditedLabel>& labels,
                                      double threshold = kDefaultMatchThreshold);

} // namespace celluda
