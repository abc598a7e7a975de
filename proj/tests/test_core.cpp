#include <gtest/gtest.h>

#include <map>
#include <random>

#include "support.hpp"

using namespace itself;

struct LabGolden {
    std::uint8_t r, g, b;
    double L, a, bb;
};

// Reference values from scikit-image's rgb2lab (D65, 2 degree observer).
const LabGolden kGoldens[] = {
    {255, 0, 0, 53.240588, 80.092308, 67.202751},   {0, 255, 0, 87.735099, -86.183030, 83.179703},
    {0, 0, 255, 32.295673, 79.185591, -107.857300}, {255, 255, 255, 100.0, -0.002455, 0.004653},
    {128, 128, 128, 53.585013, -0.001473, 0.002791}, {12, 200, 77, 70.815745, -66.543544, 48.873178},
    {0, 0, 0, 0.0, 0.0, 0.0},                        {250, 240, 10, 92.869496, -16.354361, 90.443935},
};

TEST(Lab, MatchesReferenceConversion) {
    for (const auto& g : kGoldens) {
        const Lab lab = srgb8_to_lab(g.r, g.g, g.b);
        EXPECT_NEAR(lab[0], g.L, 0.01) << int(g.r) << "," << int(g.g) << "," << int(g.b);
        EXPECT_NEAR(lab[1], g.a, 0.01);
        EXPECT_NEAR(lab[2], g.bb, 0.01);
    }
}

TEST(Lab, RoundTripsThroughSrgb) {
    std::mt19937 rng(7);
    std::uniform_int_distribution<int> d(0, 255);
    for (int i = 0; i < 500; ++i) {
        const std::uint8_t r = std::uint8_t(d(rng)), g = std::uint8_t(d(rng)), b = std::uint8_t(d(rng));
        const auto back = lab_to_srgb8(srgb8_to_lab(r, g, b));
        EXPECT_EQ(back[0], r);
        EXPECT_EQ(back[1], g);
        EXPECT_EQ(back[2], b);
    }
}

TEST(Lab, NormalizedChannelsStayInUnitRange) {
    std::mt19937 rng(3);
    const LabImage lab = rgb_to_lab(testing_support::random_rgb(32, 32, rng));
    ASSERT_EQ(lab.data.size(), 32u * 32u * 3u);
    for (double v : lab.normalized) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
}

TEST(Lab, GrayscaleKeepsOnlyLightness) {
    RgbImage g(4, 2, 1);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] = std::uint8_t(i * 30);
    const LabImage lab = rgb_to_lab(g);
    EXPECT_EQ(lab.channels, 1);
    EXPECT_EQ(lab.data.size(), 8u);
    // Same lightness as the equal-valued RGB triple, up to the rounding of the
    // conversion matrix rows (they sum to 1 only to about 1e-7).
    for (std::size_t i = 0; i < 8; ++i)
        EXPECT_NEAR(lab.data[i], srgb8_to_lab(g.data[i], g.data[i], g.data[i])[0], 1e-4);
}

TEST(Lab, RejectsEmptyImage) { EXPECT_THROW(rgb_to_lab(RgbImage(0, 0, 3)), InvalidArgument); }

TEST(ColorDistance, IsScaledToUnitInterval) {
    const double a[3] = {0, 0, 0}, b[3] = {1, 1, 1};
    EXPECT_DOUBLE_EQ(color_distance(a, b), 1.0);
    EXPECT_DOUBLE_EQ(color_distance(a, a), 0.0);
}

TEST(Quantize, HistogramMatchesBruteForceCount) {
    std::mt19937 rng(11);
    const LabImage lab = rgb_to_lab(testing_support::random_rgb(40, 30, rng));
    const QuantizedPalette pal = quantize(lab, 8);

    // Oracle: bin each pixel independently and count.
    std::map<std::array<int, 3>, int> count;
    for (std::size_t p = 0; p < lab.pixel_count(); ++p) {
        std::array<int, 3> key{};
        for (int c = 0; c < 3; ++c) key[c] = std::min(7, int(lab.normalized[p * 3 + c] * 8));
        ++count[key];
    }
    ASSERT_EQ(pal.size(), count.size());
    double total = 0.0;
    for (double f : pal.global_frequency) total += f;
    EXPECT_NEAR(total, 1.0, 1e-12);

    std::size_t i = 0;
    for (const auto& [key, n] : count) {
        EXPECT_NEAR(pal.global_frequency[i], double(n) / double(lab.pixel_count()), 1e-12);
        // The representative lies inside its bin.
        for (int c = 0; c < 3; ++c) {
            EXPECT_GE(pal.colors[i][c], key[c] / 8.0 - 1e-12);
            EXPECT_LE(pal.colors[i][c], (key[c] + 1) / 8.0 + 1e-12);
        }
        ++i;
    }
}

TEST(Quantize, SingleColorImageHasOneBin) {
    const LabImage lab = rgb_to_lab(testing_support::solid(5, 5, 10, 200, 30));
    const QuantizedPalette pal = quantize(lab);
    EXPECT_EQ(pal.size(), 1u);
    EXPECT_DOUBLE_EQ(pal.global_frequency[0], 1.0);
}

TEST(Quantize, RejectsTooFewBins) {
    const LabImage lab = rgb_to_lab(testing_support::solid(2, 2, 0, 0, 0));
    EXPECT_THROW(quantize(lab, 1), InvalidArgument);
}

TEST(Normalize, ConstantInputGivesHalf) {
    const std::vector<double> v{3, 3, 3};
    for (double x : minmax_normalize(std::span<const double>(v))) EXPECT_EQ(x, 0.5);
}

TEST(Normalize, MapsExtremesToZeroAndOne) {
    const std::vector<double> v{2, 4, 3};
    const auto n = minmax_normalize(std::span<const double>(v));
    EXPECT_EQ(n[0], 0.0);
    EXPECT_EQ(n[1], 1.0);
    EXPECT_EQ(n[2], 0.5);
}

TEST(LabelMap, ValidityAndRasterize) {
    const LabelMap lm = testing_support::block_labels(4, 4, 2, 2);
    EXPECT_TRUE(is_valid(lm));
    const std::vector<double> scores{0.1, 0.2, 0.3, 0.4};
    const SaliencyMap m = rasterize(lm, scores);
    EXPECT_EQ(m(3, 3), 0.4);
    EXPECT_EQ(m(0, 3), 0.3);
    const auto means = superpixel_means(lm, m);
    for (int i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(means[i], scores[i]);

    LabelMap bad = lm;
    bad.count = 5;
    EXPECT_FALSE(is_valid(bad));
}
