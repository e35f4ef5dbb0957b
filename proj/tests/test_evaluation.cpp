#include "support/oracles.hpp"

#include <celluda/evaluation.hpp>

#include <gtest/gtest.h>

using namespace celluda;

namespace {

PointSet pts(std::initializer_list<Point> ps, int size = 128) { return PointSet(std::vector<Point>(ps), size, size); }

} // namespace

TEST(MatchPoints, IdentityMatchesEverything)
{
    const auto p = pts({{1, 2}, {40, 50}, {90, 10}});
    const auto m = match_points(p, p, 10.0);
    EXPECT_EQ(m.tp, 3);
    EXPECT_EQ(m.fp, 0);
    EXPECT_EQ(m.fn, 0);
    EXPECT_DOUBLE_EQ(m.total_distance(), 0.0);
}

TEST(MatchPoints, MixedExample)
{
    const auto m = match_points(pts({{0, 0}, {20, 20}}), pts({{3, 4}, {50, 50}}), 10.0);
    EXPECT_EQ(m.tp, 1);
    EXPECT_EQ(m.fp, 1);
    EXPECT_EQ(m.fn, 1);
    ASSERT_EQ(m.pairs.size(), 1u);
    EXPECT_DOUBLE_EQ(m.pairs[0].distance, 5.0);
    EXPECT_EQ(oracle::brute_force_match(pts({{0, 0}, {20, 20}}), pts({{3, 4}, {50, 50}}), 10.0).tp, 1);
}

TEST(MatchPoints, GateRejectsBeyondThreshold)
{
    const auto m = match_points(pts({{0, 0}}), pts({{0, 11}}), 10.0);
    EXPECT_EQ(m.tp, 0);
    EXPECT_EQ(m.fp, 1);
    EXPECT_EQ(m.fn, 1);
}

TEST(MatchPoints, GateIsInclusive)
{
    EXPECT_EQ(match_points(pts({{0, 0}}), pts({{0, 10}}), 10.0).tp, 1);
}

TEST(MatchPoints, MaximisesCardinalityBeforeDistance)
{
    // Greedy nearest pairing would match d0-g1 and strand d1.
    const auto dets = pts({{0, 5}, {0, 14}});
    const auto gt = pts({{0, 0}, {0, 9}});
    const auto m = match_points(dets, gt, 6.0);
    EXPECT_EQ(m.tp, 2);
    EXPECT_DOUBLE_EQ(m.total_distance(), 10.0);
}

TEST(MatchPoints, EmptyInputs)
{
    EXPECT_EQ(match_points(pts({}), pts({}), 10.0).tp, 0);
    const auto m = match_points(pts({{1, 1}}), pts({}), 10.0);
    EXPECT_EQ(m.fp, 1);
    EXPECT_EQ(m.fn, 0);
}

TEST(MatchPoints, OracleEquivalenceProperty)
{
    Rng rng(99);
    for (int trial = 0; trial < 1000; ++trial) {
        const auto dets = oracle::random_points(rng, static_cast<int>(uniform_index(rng, 7)), 40, 40);
        const auto gt = oracle::random_points(rng, static_cast<int>(uniform_index(rng, 7)), 40, 40);
        const double th = 2.0 + 15.0 * uniform01(rng);
        const auto m = match_points(dets, gt, th);
        const auto ref = oracle::brute_force_match(dets, gt, th);
        ASSERT_EQ(m.tp, ref.tp);
        EXPECT_NEAR(m.total_distance(), ref.total_distance, 1e-9);
        EXPECT_EQ(m.fp, static_cast<int>(dets.size()) - m.tp);
        EXPECT_EQ(m.fn, static_cast<int>(gt.size()) - m.tp);
        std::vector<int> seen_d(dets.size()), seen_g(gt.size());
        for (const auto& p : m.pairs) {
            EXPECT_LE(p.distance, th);
            EXPECT_EQ(++seen_d[p.det_index], 1);
            EXPECT_EQ(++seen_g[p.gt_index], 1);
        }
    }
}

TEST(MatchPoints, SymmetryProperty)
{
    Rng rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        const auto a = oracle::random_points(rng, static_cast<int>(uniform_index(rng, 7)), 30, 30);
        const auto b = oracle::random_points(rng, static_cast<int>(uniform_index(rng, 7)), 30, 30);
        const auto ab = match_points(a, b, 8.0);
        const auto ba = match_points(b, a, 8.0);
        EXPECT_EQ(ab.tp, ba.tp);
        EXPECT_EQ(ab.fp, ba.fn);
        EXPECT_EQ(ab.fn, ba.fp);
    }
}

TEST(MatchPoints, ThresholdMonotonicityProperty)
{
    Rng rng(8);
    for (int trial = 0; trial < 200; ++trial) {
        const auto a = oracle::random_points(rng, static_cast<int>(uniform_index(rng, 7)), 30, 30);
        const auto b = oracle::random_points(rng, static_cast<int>(uniform_index(rng, 7)), 30, 30);
        int prev = 0;
        for (double th = 1.0; th <= 30.0; th += 2.5) {
            const int tp = match_points(a, b, th).tp;
            EXPECT_GE(tp, prev);
            prev = tp;
        }
    }
}

TEST(F1Score, Arithmetic)
{
    const auto f = f1_score(DetectionCounts{1, 1, 1});
    EXPECT_DOUBLE_EQ(f.f1, 0.5);
    EXPECT_DOUBLE_EQ(f.precision, 0.5);
    EXPECT_DOUBLE_EQ(f.recall, 0.5);
}

TEST(F1Score, EmptySceneIsPerfect)
{
    const auto f = f1_score(DetectionCounts{0, 0, 0});
    EXPECT_DOUBLE_EQ(f.f1, 1.0);
}

TEST(F1Score, VanishingDenominatorsGiveZero)
{
    const auto f = f1_score(DetectionCounts{0, 0, 3});
    EXPECT_DOUBLE_EQ(f.precision, 0.0);
    EXPECT_DOUBLE_EQ(f.recall, 0.0);
    EXPECT_DOUBLE_EQ(f.f1, 0.0);
    EXPECT_DOUBLE_EQ(f1_score(DetectionCounts{4, 0, 0}).f1, 1.0);
}

TEST(PseudoLabelCorrect, Cases)
{
    const auto gt = pts({{10, 10}, {50, 50}});
    EXPECT_TRUE(pseudo_label_correct(gt, gt));
    EXPECT_FALSE(pseudo_label_correct(pts({{10, 10}}), gt));
    EXPECT_TRUE(pseudo_label_correct(pts({{16, 18}, {44, 50}}), gt));
    EXPECT_FALSE(pseudo_label_correct(pts({{10, 10}, {50, 50}, {90, 90}}), gt));
}

TEST(AccuracyByCellCount, BucketsByDetectedCount)
{
    const auto g1 = pts({{10, 10}});
    const auto g2 = pts({{10, 10}, {50, 50}});
    const auto d_ok1 = g1;
    const auto d_bad2 = pts({{10, 10}, {90, 90}});
    const auto d_ok2 = g2;
    const auto h = accuracy_by_cell_count({{&d_ok1, &g1}, {&d_bad2, &g2}, {&d_ok2, &g2}});
    ASSERT_EQ(h.size(), 2u);
    EXPECT_EQ(h.at(1).total, 1);
    EXPECT_DOUBLE_EQ(h.at(1).rate(), 1.0);
    EXPECT_EQ(h.at(2).total, 2);
    EXPECT_DOUBLE_EQ(h.at(2).rate(), 0.5);
    EXPECT_EQ(h.count(3), 0u);
}

TEST(AccuracyByCellCount, AllCorrectGivesOnes)
{
    const auto g = pts({{10, 10}, {20, 40}, {70, 70}});
    const auto h = accuracy_by_cell_count({{&g, &g}, {&g, &g}});
    for (const auto& [k, b] : h) EXPECT_DOUBLE_EQ(b.rate(), 1.0);
}
