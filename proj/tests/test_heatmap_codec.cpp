#include "support/oracles.hpp"

#include <celluda/errors.hpp>
#include <celluda/heatmap_codec.hpp>

#include <gtest/gtest.h>

#include <cmath>

using namespace celluda;

namespace {

PointSet pts(std::initializer_list<Point> ps, int size = 128) { return PointSet(std::vector<Point>(ps), size, size); }

} // namespace

TEST(GenerateHeatmap, PeakValueAtCentroid)
{
    const auto h = generate_heatmap(pts({{64, 64}}), 6.0);
    EXPECT_DOUBLE_EQ(h(64, 64), 255.0);
}

TEST(GenerateHeatmap, EmptyPointSetGivesZeros)
{
    const auto h = generate_heatmap(pts({}), 6.0);
    EXPECT_EQ(h.height(), 128);
    EXPECT_EQ(h.values().abs().maxCoeff(), 0.0);
}

TEST(GenerateHeatmap, ValueOneSigmaAway)
{
    const auto h = generate_heatmap(pts({{64, 64}}), 6.0);
    EXPECT_NEAR(h(70, 64), 255.0 * std::exp(-1.0), 1e-12);
    EXPECT_NEAR(h(70, 64), 93.81, 0.005);
}

TEST(GenerateHeatmap, ComposesByMaximumNotSum)
{
    const auto h = generate_heatmap(pts({{60, 60}, {68, 60}}), 6.0);
    const double single = 255.0 * std::exp(-16.0 / 36.0);
    EXPECT_NEAR(h(64, 60), single, 1e-12);
    EXPECT_NEAR(h(64, 60), 163.50, 0.005);
    EXPECT_LT(h(64, 60), 2.0 * single - 1.0);
}

TEST(GenerateHeatmap, RejectsBadParameters)
{
    EXPECT_THROW(generate_heatmap(pts({{1, 1}}), 0.0), UsageError);
    EXPECT_THROW(generate_heatmap(pts({{1, 1}}), -1.0), UsageError);
    EXPECT_THROW(generate_heatmap(pts({{1, 1}}), 6.0, 0.0), UsageError);
    EXPECT_THROW(generate_heatmap(pts({{1, 1}}), 6.0, 256.0), UsageError);
}

TEST(GenerateHeatmap, RangeAndMaxCompositionProperty)
{
    Rng rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        const auto ps = oracle::random_points(rng, 1 + static_cast<int>(uniform_index(rng, 6)), 40, 40);
        const double sigma = 1.0 + 6.0 * uniform01(rng);
        const double amp = 1.0 + 254.0 * uniform01(rng);
        const auto h = generate_heatmap(ps, sigma, amp);
        EXPECT_GE(h.values().minCoeff(), 0.0);
        EXPECT_LE(h.values().maxCoeff(), amp);
        for (int r = 0; r < 40; r += 3)
            for (int c = 0; c < 40; c += 3) {
                double best = 0.0;
                for (const auto& p : ps) best = std::max(best, amp * std::exp(-squared_distance(p, {double(r), double(c)}) / (sigma * sigma)));
                EXPECT_NEAR(h(r, c), best, 1e-9);
            }
        for (const auto& p : ps) EXPECT_NEAR(h(int(p.row), int(p.col)), amp, 1e-9);
    }
}

TEST(Heatmap, RejectsOutOfRangeValues)
{
    Image v = Image::Zero(4, 4);
    v(1, 1) = 256.0;
    EXPECT_THROW(Heatmap(v, 1.0), UsageError);
    v(1, 1) = std::nan("");
    EXPECT_THROW(Heatmap(v, 1.0), UsageError);
    v(1, 1) = -0.5;
    EXPECT_THROW(Heatmap(v, 1.0), UsageError);
}

TEST(PointSet, RejectsOutOfBoundsAndDuplicates)
{
    PointSet ps(10, 10);
    ps.add({0, 0});
    EXPECT_THROW(ps.add({0, 0}), UsageError);
    EXPECT_THROW(ps.add({10, 0}), UsageError);
    EXPECT_THROW(ps.add({-0.5, 3}), UsageError);
    EXPECT_NO_THROW(ps.add({9.99, 9.99}));
}

TEST(DetectPeaks, SinglePeak)
{
    const auto h = generate_heatmap(pts({{64, 64}}), 6.0);
    EXPECT_EQ(detect_peaks(h, 100.0, 6), pts({{64, 64}}));
}

TEST(DetectPeaks, ZeroMapHasNoPeaks)
{
    EXPECT_TRUE(detect_peaks(Heatmap::zeros(128, 128, 6.0), 100.0, 6).empty());
}

TEST(DetectPeaks, TwoPeaksAgainstExhaustiveScan)
{
    const auto h = generate_heatmap(pts({{40, 40}, {80, 80}}), 6.0);
    // Exhaustive windowed-maximum scan as reference.
    PointSet ref(128, 128);
    for (int r = 0; r < 128; ++r)
        for (int c = 0; c < 128; ++c) {
            if (!(h(r, c) > 100.0)) continue;
            bool is_max = true;
            for (int dr = -6; dr <= 6 && is_max; ++dr)
                for (int dc = -6; dc <= 6; ++dc) {
                    const int rr = r + dr, cc = c + dc;
                    if ((dr || dc) && rr >= 0 && rr < 128 && cc >= 0 && cc < 128 && h(rr, cc) >= h(r, c)) {
                        is_max = false;
                        break;
                    }
                }
            if (is_max) ref.add({double(r), double(c)});
        }
    EXPECT_EQ(ref, pts({{40, 40}, {80, 80}}));
    EXPECT_EQ(detect_peaks(h, 100.0, 6), ref);
}

TEST(DetectPeaks, ThresholdIsStrict)
{
    Image v = Image::Zero(16, 16);
    v(8, 8) = 100.0;
    EXPECT_TRUE(detect_peaks(Heatmap(v, 0.0), 100.0, 3).empty());
    v(8, 8) = 100.5;
    EXPECT_EQ(detect_peaks(Heatmap(v, 0.0), 100.0, 3).size(), 1u);
}

TEST(DetectPeaks, PlateauYieldsOneRowMajorFirstPeak)
{
    Image v = Image::Zero(16, 16);
    v.block(5, 6, 2, 3) = 200.0;
    const auto p = detect_peaks(Heatmap(v, 0.0), 100.0, 3);
    ASSERT_EQ(p.size(), 1u);
    EXPECT_EQ(p[0], (Point{5, 6}));
}

TEST(DetectPeaks, RejectsBadPreconditions)
{
    const auto h = Heatmap::zeros(8, 8, 1.0);
    EXPECT_THROW(detect_peaks(h, 0.0, 3), UsageError);
    EXPECT_THROW(detect_peaks(h, 255.0, 3), UsageError);
    EXPECT_THROW(detect_peaks(h, 100.0, 0), UsageError);
}

TEST(DetectPeaks, RoundTripProperty)
{
    Rng rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const int n = 1 + static_cast<int>(uniform_index(rng, 6));
        const auto truth = oracle::separated_points(rng, n, 128, 18.0, 6.0);
        const auto found = detect_peaks(generate_heatmap(truth, 6.0), 100.0, 6);
        ASSERT_EQ(found.size(), truth.size());
        for (const auto& p : truth) {
            double best = 1e9;
            for (const auto& q : found) best = std::min(best, distance(p, q));
            EXPECT_LE(best, 1.0);
        }
    }
}

TEST(RegeneratePseudoHeatmap, CleanGaussianIsFixedPoint)
{
    const auto h = generate_heatmap(pts({{64, 64}}), 6.0);
    const auto r = regenerate_pseudo_heatmap(h, 100.0, 6.0);
    EXPECT_EQ(r.points, pts({{64, 64}}));
    EXPECT_EQ(r.heatmap, h);
}

TEST(RegeneratePseudoHeatmap, RidgeWithTwoMaxima)
{
    // Elongated ridge along rows 55..75 with bumps at rows 60 and 70.
    Image v = Image::Zero(128, 128);
    for (int r = 0; r < 128; ++r)
        for (int c = 0; c < 128; ++c) {
            const double across = std::exp(-((c - 64.0) * (c - 64.0)) / 9.0);
            const double along = 120.0 * std::exp(-((r - 65.0) * (r - 65.0)) / 100.0)
                + 60.0 * std::exp(-((r - 60.0) * (r - 60.0)) / 4.0) + 60.0 * std::exp(-((r - 70.0) * (r - 70.0)) / 4.0);
            v(r, c) = std::min(255.0, along * across);
        }
    const Heatmap pred(v, 0.0);
    const auto r = regenerate_pseudo_heatmap(pred, 100.0, 6.0);
    EXPECT_EQ(r.points, detect_peaks(pred, 100.0, 6));
    EXPECT_EQ(r.points, pts({{60, 64}, {70, 64}}));
    EXPECT_EQ(r.heatmap, generate_heatmap(r.points, 6.0));
}

TEST(RegeneratePseudoHeatmap, EmptyPredictionGivesEmptyLabel)
{
    const auto r = regenerate_pseudo_heatmap(Heatmap::zeros(32, 32, 0.0), 100.0, 6.0);
    EXPECT_TRUE(r.points.empty());
    EXPECT_EQ(r.heatmap.values().maxCoeff(), 0.0);
}

TEST(RegeneratePseudoHeatmap, IdempotentProperty)
{
    Rng rng(17);
    for (int trial = 0; trial < 100; ++trial) {
        Image v(64, 64);
        for (Eigen::Index i = 0; i < v.size(); ++i) v.data()[i] = 255.0 * uniform01(rng);
        const auto once = regenerate_pseudo_heatmap(Heatmap(v, 0.0), 100.0, 6.0);
        const auto twice = regenerate_pseudo_heatmap(once.heatmap, 100.0, 6.0);
        EXPECT_EQ(once.points, twice.points);
    }
}

TEST(SynthesizeNegative, ForcedRemoveOfOnlyPointGivesZeros)
{
    const auto n = synthesize_negative(pts({{64, 64}}), 6.0, 1, 15.0, PerturbationMode::remove);
    EXPECT_EQ(n.perturbation.mode, PerturbationMode::remove);
    EXPECT_EQ(n.perturbation.affected_point, (Point{64, 64}));
    EXPECT_TRUE(n.points.empty());
    EXPECT_EQ(n.heatmap.values().maxCoeff(), 0.0);
}

TEST(SynthesizeNegative, ForcedShiftRespectsExclusionOverSeeds)
{
    const auto src = pts({{64, 64}});
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto n = synthesize_negative(src, 6.0, seed, 15.0, PerturbationMode::shift);
        ASSERT_EQ(n.points.size(), 1u);
        EXPECT_GE(distance(n.points[0], {64, 64}), 15.0);
        ASSERT_TRUE(n.perturbation.shift_vector.has_value());
        EXPECT_EQ(n.heatmap, generate_heatmap(n.points, 6.0));
    }
}

TEST(SynthesizeNegative, ForcedAddRespectsExclusionOverSeeds)
{
    const auto src = pts({{30, 30}, {90, 90}});
    for (std::uint64_t seed = 0; seed < 1000; ++seed) {
        const auto n = synthesize_negative(src, 6.0, seed, 15.0, PerturbationMode::add);
        ASSERT_EQ(n.points.size(), 3u);
        const Point& added = n.perturbation.affected_point;
        EXPECT_TRUE(n.points.contains(added));
        EXPECT_GE(distance(added, {30, 30}), 15.0);
        EXPECT_GE(distance(added, {90, 90}), 15.0);
    }
}

TEST(SynthesizeNegative, NeverEqualsPositiveAndIsDeterministic)
{
    Rng rng(4);
    for (int trial = 0; trial < 300; ++trial) {
        const auto src = oracle::random_points(rng, static_cast<int>(uniform_index(rng, 6)), 64, 64);
        const auto pos = generate_heatmap(src, 6.0);
        const auto a = synthesize_negative(src, 6.0, trial);
        const auto b = synthesize_negative(src, 6.0, trial);
        EXPECT_FALSE(a.heatmap == pos);
        EXPECT_EQ(a.heatmap, b.heatmap);
        EXPECT_EQ(a.perturbation.mode, b.perturbation.mode);
        if (src.empty()) {
            EXPECT_EQ(a.perturbation.mode, PerturbationMode::add);
        }
        if (a.perturbation.mode != PerturbationMode::remove) {
            const auto& q = a.perturbation.affected_point;
            const Point moved = a.perturbation.mode == PerturbationMode::add
                                    ? q
                                    : Point{q.row + a.perturbation.shift_vector->row, q.col + a.perturbation.shift_vector->col};
            for (const auto& p : src) EXPECT_GE(distance(p, moved), 15.0);
        }
    }
}

TEST(SynthesizeNegative, ModesAreAllReachable)
{
    const auto src = pts({{30, 30}, {90, 90}});
    int counts[3] = {0, 0, 0};
    for (std::uint64_t seed = 0; seed < 300; ++seed) ++counts[static_cast<int>(synthesize_negative(src, 6.0, seed).perturbation.mode)];
    for (int c : counts) EXPECT_GT(c, 60);
}

TEST(SynthesizeNegative, FallsBackToRemoveWhenNoSiteExists)
{
    // Every pixel of a 10x10 patch lies within 15 px of its centre.
    const auto src = PointSet({{5, 5}}, 10, 10);
    const auto n = synthesize_negative(src, 2.0, 3, 15.0, PerturbationMode::add);
    EXPECT_EQ(n.perturbation.mode, PerturbationMode::remove);
    EXPECT_TRUE(n.points.empty());
}

TEST(SynthesizeNegative, ForcedRemoveOnEmptySetIsUsageError)
{
    EXPECT_THROW(synthesize_negative(pts({}), 6.0, 1, 15.0, PerturbationMode::remove), UsageError);
    EXPECT_THROW(synthesize_negative(pts({}), 6.0, 1, 15.0, PerturbationMode::shift), UsageError);
}
