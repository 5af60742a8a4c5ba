#include "leafdx/lesion_features.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cstring>
#include <random>

using namespace leafdx;
using namespace leafdx::features;

namespace {

Raster random_patch(int w, int h, std::mt19937_64& rng) {
    Raster p(w, h, 3);
    for (auto& b : p.data()) b = static_cast<std::uint8_t>(rng() & 0xff);
    return p;
}

Raster solid(int w, int h, std::array<std::uint8_t, 3> c) {
    Raster p(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) p.set_rgb(x, y, c);
    return p;
}

BinaryMask full(int w, int h) { return BinaryMask(w, h, 1); }

bool bit_identical(const FeatureVector& a, const FeatureVector& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(EllipticalMask, MatchesCellFormula) {
    for (int h = 1; h <= 30; ++h)
        for (int w = 1; w <= 30; ++w) {
            const BinaryMask m = elliptical_mask(h, w);
            ASSERT_EQ(m.width(), w);
            ASSERT_EQ(m.height(), h);
            for (int i = 0; i < h; ++i)
                for (int j = 0; j < w; ++j) ASSERT_EQ(m(j, i), oracle::mask_cell(h, w, i, j)) << h << "x" << w;
        }
}

TEST(EllipticalMask, HandExamples) {
    const BinaryMask m4 = elliptical_mask(4, 4);
    EXPECT_EQ(m4.count(), 9u);
    for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(m4(j, i), (i - 2) * (i - 2) + (j - 2) * (j - 2) < 4);
    const BinaryMask m2 = elliptical_mask(2, 2);
    EXPECT_EQ(m2.count(), 1u);
    EXPECT_EQ(m2(1, 1), 1);
    EXPECT_EQ(elliptical_mask(1, 1).count(), 0u);
    EXPECT_THROW(elliptical_mask(0, 3), Error);
}

TEST(Colour, PureRed) {
    const auto c = colour_features(solid(6, 5, {255, 0, 0}), full(6, 5));
    EXPECT_EQ(c, (std::array<double, 4>{1, 0, 0, 0}));
}

TEST(Colour, MaskSelectsGreenHalf) {
    Raster p = solid(10, 6, {255, 0, 0});
    BinaryMask m(10, 6);
    for (int y = 0; y < 6; ++y)
        for (int x = 5; x < 10; ++x) {
            p.set_rgb(x, y, {0, 255, 0});
            m(x, y) = 1;
        }
    const auto c = colour_features(p, m);
    EXPECT_DOUBLE_EQ(c[0], 0.0);
    EXPECT_DOUBLE_EQ(c[1], 1.0);
    EXPECT_DOUBLE_EQ(c[2], 0.0);
    EXPECT_NEAR(c[3], 120.0 / 360.0, 1e-15);
}

TEST(Colour, EmptyMaskIsError) {
    try {
        colour_features(solid(4, 4, {1, 2, 3}), BinaryMask(4, 4));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyMask);
    }
    EXPECT_THROW(texture_features(solid(4, 4, {1, 2, 3}), BinaryMask(4, 4)), Error);
    EXPECT_THROW(assemble(solid(4, 4, {1, 2, 3}), BinaryMask(5, 4, 1)), Error);
    EXPECT_THROW(assemble(solid(1, 1, {1, 2, 3}), elliptical_mask(1, 1)), Error);
}

TEST(Texture, ConstantPatchSingleCell) {
    const TextureResult t = texture_features(solid(12, 12, {90, 140, 30}), elliptical_mask(12, 12));
    ASSERT_EQ(t.values.size(), 120u);
    EXPECT_FALSE(t.no_pairs);
    for (int g = 0; g < 24; ++g) {
        EXPECT_EQ(t.values[g * 5 + 0], 0.0);
        EXPECT_EQ(t.values[g * 5 + 1], 0.0);
        EXPECT_EQ(t.values[g * 5 + 2], 1.0);
        EXPECT_EQ(t.values[g * 5 + 3], 1.0);
        EXPECT_EQ(t.values[g * 5 + 4], 0.0);
    }
}

TEST(Texture, ConstantRedAssembles) {
    const FeatureVector v = assemble(solid(10, 10, {255, 0, 0}), full(10, 10));
    ASSERT_EQ(v.size(), 124u);
    EXPECT_EQ(v[0], 1.0);
    EXPECT_EQ(v[1], 0.0);
    EXPECT_EQ(v[2], 0.0);
    EXPECT_EQ(v[3], 0.0);
    const double unit[5] = {0, 0, 1, 1, 0};
    for (int i = 4; i < 124; ++i) EXPECT_EQ(v[i], unit[(i - 4) % 5]) << feature_name(i);
}

TEST(Texture, HorizontalStripesContrastVertical) {
    Raster p(12, 12, 3);
    for (int y = 0; y < 12; ++y)
        for (int x = 0; x < 12; ++x) p.set_rgb(x, y, y % 2 ? std::array<std::uint8_t, 3>{200, 200, 200}
                                                            : std::array<std::uint8_t, 3>{20, 20, 20});
    const TextureResult t = texture_features(p, full(12, 12));
    // R block: angle slots 0 (0 deg) and 2 (90 deg), stat 0 = contrast.
    EXPECT_EQ(t.values[0 * 5], 0.0);
    EXPECT_GT(t.values[2 * 5], 0.0);
    EXPECT_GT(t.values[2 * 5], t.values[0 * 5]);
}

TEST(Texture, MatchesPairEnumeration) {
    std::mt19937_64 rng(21);
    const int offsets[4][2] = {{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}};
    for (int trial = 0; trial < 20; ++trial) {
        const int w = 10 + static_cast<int>(rng() % 16), h = 10 + static_cast<int>(rng() % 16);
        const Raster p = random_patch(w, h, rng);
        const BinaryMask m = elliptical_mask(h, w);
        const HsvPlanes hsv = rgb_to_hsv(p);
        std::array<Plane, 6> planes;
        for (int c = 0; c < 3; ++c) {
            planes[c] = Plane(w, h);
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x) planes[c](x, y) = p.at(x, y, c) / 255.0;
        }
        planes[3] = hsv.h;
        planes[4] = hsv.s;
        planes[5] = hsv.v;
        const TextureResult t = texture_features(p, m);
        for (int c = 0; c < 6; ++c)
            for (int a = 0; a < 4; ++a) {
                bool none = false;
                const auto g = oracle::glcm(planes[c], m, offsets[a][0], offsets[a][1], kGlcmLevels, none);
                const oracle::Stats s = oracle::glcm_stats(g, kGlcmLevels);
                const double* got = &t.values[(c * 4 + a) * 5];
                EXPECT_NEAR(got[0], s.contrast, 1e-12);
                EXPECT_NEAR(got[1], s.correlation, 1e-12);
                EXPECT_NEAR(got[2], s.energy, 1e-12);
                EXPECT_NEAR(got[3], s.homogeneity, 1e-12);
                EXPECT_NEAR(got[4], s.entropy, 1e-12);
            }
    }
}

TEST(Texture, StatBoundsOnRandomPatches) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 30; ++trial) {
        const int w = 10 + static_cast<int>(rng() % 16), h = 10 + static_cast<int>(rng() % 16);
        const TextureResult t = texture_features(random_patch(w, h, rng), elliptical_mask(h, w));
        for (int g = 0; g < 24; ++g) {
            EXPECT_GT(t.values[g * 5 + 2], 0.0);
            EXPECT_LE(t.values[g * 5 + 2], 1.0);
            EXPECT_GT(t.values[g * 5 + 3], 0.0);
            EXPECT_LE(t.values[g * 5 + 3], 1.0);
            EXPECT_GE(t.values[g * 5 + 4], 0.0);
            EXPECT_GE(t.values[g * 5 + 1], -1.0 - 1e-12);
            EXPECT_LE(t.values[g * 5 + 1], 1.0 + 1e-12);
        }
    }
}

TEST(Texture, NoPairsFlagged) {
    // Isolated mask pixels have no neighbour pairs at any angle.
    BinaryMask m(6, 6);
    m(0, 0) = 1;
    m(3, 3) = 1;
    const TextureResult t = texture_features(solid(6, 6, {10, 20, 30}), m);
    EXPECT_TRUE(t.no_pairs);
    for (double v : t.values) EXPECT_EQ(v, 0.0);
}

TEST(Assemble, LengthAndDeterminism) {
    std::mt19937_64 rng(23);
    for (int trial = 0; trial < 10; ++trial) {
        const int w = 10 + static_cast<int>(rng() % 16), h = 10 + static_cast<int>(rng() % 16);
        const Raster p = random_patch(w, h, rng);
        const FeatureVector a = assemble(p, elliptical_mask(h, w));
        const FeatureVector b = assemble(Raster(p), elliptical_mask(h, w));
        EXPECT_EQ(a.size(), static_cast<std::size_t>(kFeatureCount));
        EXPECT_TRUE(bit_identical(a, b));
        for (double v : a) EXPECT_TRUE(std::isfinite(v));
    }
}

TEST(Assemble, MaskedOutPixelsIgnored) {
    std::mt19937_64 rng(24);
    for (int trial = 0; trial < 10; ++trial) {
        const int w = 10 + static_cast<int>(rng() % 16), h = 10 + static_cast<int>(rng() % 16);
        Raster p = random_patch(w, h, rng);
        const BinaryMask m = elliptical_mask(h, w);
        const FeatureVector before = assemble(p, m);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                if (!m(x, y))
                    p.set_rgb(x, y, {static_cast<std::uint8_t>(rng()), static_cast<std::uint8_t>(rng()),
                                     static_cast<std::uint8_t>(rng())});
        EXPECT_TRUE(bit_identical(before, assemble(p, m)));
    }
}

TEST(Assemble, PatchFeaturesCropsAndMasks) {
    std::mt19937_64 rng(25);
    const Raster img = random_patch(60, 40, rng);
    const Rect box{13, 7, 21, 17};
    EXPECT_TRUE(bit_identical(patch_features(img, box),
                              assemble(img.crop(box.x, box.y, box.w, box.h), elliptical_mask(box.h, box.w))));
}

TEST(FeatureName, Layout) {
    EXPECT_EQ(feature_name(0), "mean_r");
    EXPECT_EQ(feature_name(3), "mean_h");
    EXPECT_EQ(feature_name(4), "R/0/contrast");
    EXPECT_EQ(feature_name(4 + 20 + 5 + 2), "G/45/energy");
    EXPECT_EQ(feature_name(4 + 60 + 15 + 1), "H/135/correlation");
    EXPECT_EQ(feature_name(123), "V/135/entropy");
    EXPECT_THROW(feature_name(124), Error);
    EXPECT_THROW(feature_name(-1), Error);
}

TEST(Scaling, FitMatchesColumnScan) {
    std::mt19937_64 rng(26);
    std::normal_distribution<double> n(0.0, 3.0);
    std::vector<FeatureVector> train(40, FeatureVector(7));
    for (auto& v : train)
        for (auto& x : v) x = n(rng);
    const ScalingParams s = fit_scaling(train);
    for (int d = 0; d < 7; ++d) {
        double lo = train[0][d], hi = train[0][d];
        for (const auto& v : train) {
            lo = v[d] < lo ? v[d] : lo;
            hi = v[d] > hi ? v[d] : hi;
        }
        EXPECT_EQ(s.min[d], lo);
        EXPECT_EQ(s.max[d], hi);
        EXPECT_LE(s.min[d], s.max[d]);
    }
    for (const auto& v : train)
        for (double x : apply_scaling(v, s)) {
            EXPECT_GE(x, -1.0);
            EXPECT_LE(x, 1.0);
        }
}

TEST(Scaling, SmallSets) {
    const std::vector<FeatureVector> one{{1.0, 2.0}};
    EXPECT_EQ(fit_scaling(one), (ScalingParams{{1.0, 2.0}, {1.0, 2.0}}));
    const std::vector<FeatureVector> two{{1.0, 2.0}, {1.0, 5.0}};
    EXPECT_EQ(fit_scaling(two), (ScalingParams{{1.0, 2.0}, {1.0, 5.0}}));
    EXPECT_THROW(fit_scaling(std::vector<FeatureVector>{}), Error);
    const std::vector<FeatureVector> ragged{{1.0}, {1.0, 2.0}};
    EXPECT_THROW(fit_scaling(ragged), Error);
}

TEST(Scaling, EndpointsAndMidpoint) {
    const ScalingParams s{{-2.0, 0.0, 3.0, 7.0}, {4.0, 1.0, 3.0, 9.0}};
    EXPECT_EQ(apply_scaling(s.min, s), (FeatureVector{-1, -1, 0, -1}));
    EXPECT_EQ(apply_scaling(s.max, s), (FeatureVector{1, 1, 0, 1}));
    EXPECT_EQ(apply_scaling(FeatureVector{1.0, 0.5, 3.0, 8.0}, s), (FeatureVector{0, 0, 0, 0}));
    // Unseen values are not clamped.
    EXPECT_EQ(apply_scaling(FeatureVector{10.0, 2.0, 100.0, 5.0}, s), (FeatureVector{3, 3, 0, -3}));
    EXPECT_THROW(apply_scaling(FeatureVector{1.0}, s), Error);
}
