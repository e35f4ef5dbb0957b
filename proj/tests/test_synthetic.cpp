#include <celluda/errors.hpp>
#include <celluda/synthetic.hpp>

#include <gtest/gtest.h>

using namespace celluda;

TEST(Synthetic, SameSeedIsIdentical)
{
    const auto spec = SyntheticDomainSpec::elongated_preset();
    const auto a = generate_synthetic_dataset(spec, 5, 42);
    const auto b = generate_synthetic_dataset(spec, 5, 42);
    for (std::size_t i = 0; i < a.size(); ++i) {
        EXPECT_TRUE((a[i].patch.pixels == b[i].patch.pixels).all());
        EXPECT_EQ(a[i].points, b[i].points);
        EXPECT_EQ(a[i].patch.source_id, b[i].patch.source_id);
    }
    const auto c = generate_synthetic_dataset(spec, 5, 43);
    EXPECT_FALSE((a[0].patch.pixels == c[0].patch.pixels).all());
}

TEST(Synthetic, PrefixStableInPatchCount)
{
    const auto spec = SyntheticDomainSpec::round_preset();
    const auto a = generate_synthetic_dataset(spec, 3, 1);
    const auto b = generate_synthetic_dataset(spec, 6, 1);
    for (std::size_t i = 0; i < a.size(); ++i) EXPECT_TRUE((a[i].patch.pixels == b[i].patch.pixels).all());
}

TEST(Synthetic, SeparationBoundsAndRangeProperty)
{
    for (const auto& spec : {SyntheticDomainSpec::round_preset(), SyntheticDomainSpec::elongated_preset()}) {
        for (const auto& p : generate_synthetic_dataset(spec, 100, 3)) {
            EXPECT_GE(static_cast<int>(p.points.size()), spec.cells_min);
            EXPECT_LE(static_cast<int>(p.points.size()), spec.cells_max);
            for (std::size_t i = 0; i < p.points.size(); ++i) {
                EXPECT_GE(p.points[i].row, spec.border);
                EXPECT_LT(p.points[i].row, spec.patch_size - spec.border);
                for (std::size_t j = i + 1; j < p.points.size(); ++j)
                    EXPECT_GE(distance(p.points[i], p.points[j]), std::max(8.0, spec.min_separation));
            }
            EXPECT_GE(p.patch.pixels.minCoeff(), 0.0);
            EXPECT_LE(p.patch.pixels.maxCoeff(), 255.0);
            EXPECT_TRUE((p.patch.pixels == p.patch.pixels.round()).all());
        }
    }
}

TEST(Synthetic, ElongatedAspectMeasuredByMoments)
{
    auto spec = SyntheticDomainSpec::elongated_preset();
    spec.aspect_min = spec.aspect_max = 4.0;
    spec.cells_min = spec.cells_max = 1;
    spec.noise_sigma = 0.0;
    spec.border = 30.0;
    std::vector<double> ratios;
    for (const auto& p : generate_synthetic_dataset(spec, 40, 5)) {
        const auto r = blob_aspect_ratios(p.patch.pixels, spec.background - 0.5 * spec.interior);
        ASSERT_EQ(r.size(), 1u);
        ratios.push_back(r[0]);
    }
    double mean = 0.0;
    for (double r : ratios) mean += r;
    mean /= static_cast<double>(ratios.size());
    EXPECT_GE(mean, 3.5);
    EXPECT_LE(mean, 4.5);
}

TEST(Synthetic, ShapeStatisticSeparatesDomains)
{
    const auto round = SyntheticDomainSpec::round_preset();
    const auto elong = SyntheticDomainSpec::elongated_preset();
    const auto a = generate_synthetic_dataset(round, 200, 10);
    const auto b = generate_synthetic_dataset(elong, 200, 11);
    int correct = 0;
    for (const auto& p : a) correct += shape_statistic(p.patch.pixels, round) < 2.0;
    for (const auto& p : b) correct += shape_statistic(p.patch.pixels, elong) >= 2.0;
    EXPECT_GE(correct, static_cast<int>(0.95 * 400));
}

TEST(Synthetic, InfeasiblePlacementIsDataError)
{
    auto spec = SyntheticDomainSpec::round_preset();
    spec.patch_size = 32;
    spec.cells_min = spec.cells_max = 40;
    EXPECT_THROW(generate_synthetic_dataset(spec, 1, 1), DataError);
}

TEST(Synthetic, SpecValidationAndJson)
{
    auto spec = SyntheticDomainSpec::round_preset();
    spec.min_separation = 5.0;
    EXPECT_THROW(spec.validate(), UsageError);
    EXPECT_THROW(generate_synthetic_dataset(SyntheticDomainSpec::round_preset(), 0, 1), UsageError);
    const auto e = SyntheticDomainSpec::elongated_preset();
    const auto back = spec_from_json(to_json(e));
    EXPECT_EQ(to_json(back), to_json(e));
    EXPECT_THROW(spec_from_json({{"bogus", 1}}), UsageError);
    EXPECT_THROW(spec_from_json({{"cell_shape", "SQUARE"}}), UsageError);
}
