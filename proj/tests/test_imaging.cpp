#include "leafdx/imaging.hpp"
#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace leafdx;

namespace {

Plane random_plane(int w, int h, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Plane p(w, h);
    for (auto& v : p.data()) v = u(rng);
    return p;
}

BinaryMask random_mask(int w, int h, double density, std::mt19937_64& rng) {
    std::bernoulli_distribution b(density);
    BinaryMask m(w, h);
    for (auto& v : m.data()) v = b(rng) ? 1 : 0;
    return m;
}

}  // namespace

TEST(Resize, HalvesLargeImage) {
    const Raster r = resize_max_side(Raster(1200, 800, 3, 10), 600);
    EXPECT_EQ(r.width(), 600);
    EXPECT_EQ(r.height(), 400);
}

TEST(Resize, SmallImageUnchanged) {
    Raster img(300, 200, 3, 0);
    img.at(5, 7, 1) = 99;
    EXPECT_EQ(resize_max_side(img, 600), img);
}

TEST(Resize, RoundsShortSide) {
    const Raster r = resize_max_side(Raster(601, 601, 3, 0), 600);
    EXPECT_EQ(r.width(), 600);
    EXPECT_EQ(r.height(), 600);
}

TEST(Resize, ConstantStaysConstant) {
    const Raster r = resize_max_side(Raster(1000, 700, 3, 77), 600);
    for (auto v : r.data()) ASSERT_EQ(v, 77);
}

TEST(Grey, Bt601Weights) {
    Raster img(3, 1, 3);
    img.set_rgb(0, 0, {255, 255, 255});
    img.set_rgb(1, 0, {0, 0, 0});
    img.set_rgb(2, 0, {255, 0, 0});
    const Plane g = rgb_to_grey(img);
    EXPECT_DOUBLE_EQ(g(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(g(1, 0), 0.0);
    EXPECT_NEAR(g(2, 0), 0.299, 1e-12);
}

TEST(Hsv, Primaries) {
    const Hsv r = rgb_to_hsv(1, 0, 0);
    EXPECT_DOUBLE_EQ(r.h, 0.0);
    EXPECT_DOUBLE_EQ(r.s, 1.0);
    EXPECT_DOUBLE_EQ(r.v, 1.0);
    const Hsv g = rgb_to_hsv(0, 1, 0);
    EXPECT_NEAR(g.h, 120.0 / 360.0, 1e-12);
    const Hsv grey = rgb_to_hsv(128 / 255.0, 128 / 255.0, 128 / 255.0);
    EXPECT_DOUBLE_EQ(grey.s, 0.0);
    EXPECT_DOUBLE_EQ(grey.h, 0.0);
    EXPECT_NEAR(grey.v, 0.502, 1e-3);
}

TEST(Hsv, RoundTripsThroughInverse) {
    std::mt19937_64 rng(3);
    std::uniform_int_distribution<int> b(0, 255);
    for (int i = 0; i < 5000; ++i) {
        const double r = b(rng) / 255.0, g = b(rng) / 255.0, bl = b(rng) / 255.0;
        const Hsv h = rgb_to_hsv(r, g, bl);
        ASSERT_GE(h.h, 0.0);
        ASSERT_LT(h.h, 1.0);
        const auto back = oracle::hsv_to_rgb(h.h, h.s, h.v);
        EXPECT_NEAR(back[0], r, 1.0 / 255);
        EXPECT_NEAR(back[1], g, 1.0 / 255);
        EXPECT_NEAR(back[2], bl, 1.0 / 255);
    }
}

TEST(MeanFilter, ConstantPlane) {
    const Plane p(9, 7, 0.4);
    const Plane f = mean_filter(p, 2);
    for (auto v : f.data()) EXPECT_NEAR(v, 0.4, 1e-15);
}

TEST(MeanFilter, InteriorImpulse) {
    Plane p(7, 7, 0.0);
    p(3, 3) = 1.0;
    const Plane f = mean_filter(p, 1);
    for (int y = 2; y <= 4; ++y)
        for (int x = 2; x <= 4; ++x) EXPECT_NEAR(f(x, y), 1.0 / 9, 1e-15);
    EXPECT_EQ(f(1, 1), 0.0);
}

TEST(MeanFilter, CornerImpulseReplicates) {
    Plane p(5, 5, 0.0);
    p(0, 0) = 1.0;
    EXPECT_NEAR(mean_filter(p, 1)(0, 0), 4.0 / 9, 1e-15);
}

TEST(MeanFilter, TranslationEquivariantInterior) {
    std::mt19937_64 rng(5);
    const Plane p = random_plane(20, 20, rng);
    Plane shifted(20, 20);
    for (int y = 0; y < 20; ++y)
        for (int x = 0; x < 20; ++x) shifted(x, y) = p.clamped(x - 1, y);
    const Plane a = mean_filter(p, 2), b = mean_filter(shifted, 2);
    for (int y = 3; y < 17; ++y)
        for (int x = 4; x < 17; ++x) EXPECT_DOUBLE_EQ(b(x, y), a(x - 1, y));
}

TEST(Otsu, SplitsBimodalHalves) {
    Plane p(10, 10);
    for (std::size_t i = 0; i < p.size(); ++i) p[i] = i % 2 ? 0.8 : 0.2;
    const double t = otsu_threshold(p);
    EXPECT_GT(t, 0.2);
    EXPECT_LE(t, 0.8);
}

TEST(Otsu, ConstantIsDegenerate) {
    try {
        otsu_threshold(Plane(4, 4, 0.5));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DegenerateHistogram);
    }
}

TEST(Otsu, MatchesExhaustiveSearch) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 100; ++trial) {
        std::array<std::uint64_t, 256> h{};
        std::normal_distribution<double> a(60 + trial, 15), b(170, 25);
        for (int i = 0; i < 3000; ++i) {
            const double v = (i % 3 ? a : b)(rng);
            ++h[static_cast<std::size_t>(std::clamp(std::lround(v), 0L, 255L))];
        }
        EXPECT_EQ(otsu_cut(h), oracle::otsu_cut(h)) << "trial " << trial;
    }
}

TEST(Otsu, ThresholdSeparatesAtCut) {
    std::mt19937_64 rng(4);
    const Plane p = random_plane(30, 30, rng);
    std::array<std::uint64_t, 256> h{};
    for (double v : p.data()) ++h[bin256(v)];
    const int k = oracle::otsu_cut(h);
    const double t = otsu_threshold(p);
    for (double v : p.data()) EXPECT_EQ(v > t, bin256(v) > k);
}

TEST(Sobel, ConstantIsZero) {
    const Plane s = sobel_magnitude(Plane(6, 6, 0.3));
    for (auto v : s.data()) EXPECT_EQ(v, 0.0);
}

TEST(Sobel, VerticalStep) {
    Plane p(8, 5, 0.0);
    for (int y = 0; y < 5; ++y)
        for (int x = 4; x < 8; ++x) p(x, y) = 1.0;
    const Plane s = sobel_magnitude(p);
    for (int y = 0; y < 5; ++y) {
        EXPECT_DOUBLE_EQ(s(3, y), 4.0);
        EXPECT_DOUBLE_EQ(s(4, y), 4.0);
        EXPECT_DOUBLE_EQ(s(1, y), 0.0);
        EXPECT_DOUBLE_EQ(s(6, y), 0.0);
    }
}

TEST(Sobel, HorizontalStepIsTranspose) {
    Plane v(8, 8, 0.0), h(8, 8, 0.0);
    for (int a = 0; a < 8; ++a)
        for (int b = 4; b < 8; ++b) {
            v(b, a) = 1.0;
            h(a, b) = 1.0;
        }
    const Plane sv = sobel_magnitude(v), sh = sobel_magnitude(h);
    for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) EXPECT_DOUBLE_EQ(sv(b, a), sh(a, b));
}

TEST(Sobel, TranslationEquivariantInterior) {
    std::mt19937_64 rng(6);
    const Plane p = random_plane(16, 16, rng);
    Plane shifted(16, 16);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) shifted(x, y) = p.clamped(x, y - 1);
    const Plane a = sobel_magnitude(p), b = sobel_magnitude(shifted);
    for (int y = 2; y < 15; ++y)
        for (int x = 1; x < 15; ++x) EXPECT_DOUBLE_EQ(b(x, y), a(x, y - 1));
}

TEST(Entropy, ConstantIsZero) {
    const Plane e = local_entropy(Plane(7, 7, 0.5), 1);
    for (auto v : e.data()) EXPECT_EQ(v, 0.0);
}

TEST(Entropy, NineDistinctBins) {
    Plane p(3, 3);
    for (int i = 0; i < 9; ++i) p[i] = (i * 20 + 5) / 255.0;
    EXPECT_NEAR(local_entropy(p, 1)(1, 1), std::log2(9.0), 1e-12);
}

TEST(Entropy, Checkerboard) {
    Plane p(7, 7);
    for (int y = 0; y < 7; ++y)
        for (int x = 0; x < 7; ++x) p(x, y) = (x + y) % 2 ? 0.9 : 0.1;
    const double e = -(4.0 / 9) * std::log2(4.0 / 9) - (5.0 / 9) * std::log2(5.0 / 9);
    EXPECT_NEAR(local_entropy(p, 1)(3, 3), e, 1e-12);
}

TEST(Morphology, ErodeFullMaskLeavesBorderRing) {
    const BinaryMask full(12, 10, 1);
    for (int r : {1, 2, 3}) {
        const BinaryMask e = erode(full, r);
        for (int y = 0; y < 10; ++y)
            for (int x = 0; x < 12; ++x) {
                const bool inner = x >= r && y >= r && x < 12 - r && y < 10 - r;
                EXPECT_EQ(e(x, y), inner ? 1 : 0);
            }
    }
}

TEST(Morphology, OpenRemovesIsolatedPixel) {
    BinaryMask m(9, 9, 0);
    m(4, 4) = 1;
    EXPECT_EQ(open(m, 1).count(), 0u);
}

TEST(Morphology, ReconstructPicksTouchedBlob) {
    BinaryMask m(20, 10, 0), marker(20, 10, 0);
    for (int y = 2; y < 6; ++y)
        for (int x = 1; x < 5; ++x) m(x, y) = 1;
    for (int y = 3; y < 8; ++y)
        for (int x = 10; x < 16; ++x) m(x, y) = 1;
    marker(12, 4) = 1;
    const BinaryMask r = reconstruct(m, marker);
    EXPECT_EQ(r.count(), 30u);
    EXPECT_EQ(r(1, 2), 0);
    EXPECT_EQ(r(10, 3), 1);
}

TEST(Morphology, OpenAndReconstructIdempotent) {
    std::mt19937_64 rng(8);
    for (int t = 0; t < 20; ++t) {
        const BinaryMask m = random_mask(30, 25, 0.6, rng);
        const BinaryMask o = open(m, 1);
        EXPECT_EQ(open(o, 1), o);
        const BinaryMask marker = random_mask(30, 25, 0.02, rng);
        const BinaryMask r = reconstruct(m, marker);
        EXPECT_EQ(reconstruct(m, r), r);
    }
}

TEST(Morphology, DispatchMatchesDirectCalls) {
    std::mt19937_64 rng(9);
    const BinaryMask m = random_mask(15, 15, 0.5, rng);
    EXPECT_EQ(morphology(m, MorphOp::Erode, 1), erode(m, 1));
    EXPECT_EQ(morphology(m, MorphOp::Dilate, 2), dilate(m, 2));
    EXPECT_EQ(morphology(m, MorphOp::Open, 1), open(m, 1));
}

TEST(Components, EmptyMask) {
    const LabelMap l = connected_components(BinaryMask(5, 5, 0), Connectivity::Eight);
    EXPECT_EQ(l.max_label(), 0);
}

TEST(Components, DiagonalNeighbours) {
    BinaryMask m(3, 3, 0);
    m(0, 0) = 1;
    m(1, 1) = 1;
    EXPECT_EQ(connected_components(m, Connectivity::Four).max_label(), 2);
    EXPECT_EQ(connected_components(m, Connectivity::Eight).max_label(), 1);
}

TEST(Components, MatchFloodFillOracle) {
    std::mt19937_64 rng(12);
    for (int t = 0; t < 40; ++t) {
        const BinaryMask m = random_mask(37, 23, 0.45, rng);
        for (bool eight : {false, true}) {
            const LabelMap a = connected_components(m, eight ? Connectivity::Eight : Connectivity::Four);
            const LabelMap b = oracle::flood_components(m, eight);
            EXPECT_TRUE(oracle::same_partition(a, b));
            EXPECT_EQ(a.max_label(), b.max_label());
        }
    }
}

TEST(Components, BoxesAreTight) {
    BinaryMask m(10, 10, 0);
    m(2, 3) = m(3, 3) = m(3, 5) = 1;
    m(3, 4) = 1;
    m(8, 8) = 1;
    const LabelMap l = connected_components(m, Connectivity::Four);
    const auto boxes = label_boxes(l);
    ASSERT_EQ(boxes.size(), 3u);
    EXPECT_EQ(boxes[l(2, 3)], (Rect{2, 3, 2, 3}));
    EXPECT_EQ(boxes[l(8, 8)], (Rect{8, 8, 1, 1}));
    EXPECT_EQ(label_mask(l, l(8, 8)).count(), 1u);
}

TEST(FillHoles, FillsEnclosedOnly) {
    BinaryMask m(7, 7, 0);
    for (int i = 1; i < 6; ++i) m(i, 1) = m(i, 5) = m(1, i) = m(5, i) = 1;
    const BinaryMask f = fill_holes(m);
    EXPECT_EQ(f(3, 3), 1);
    EXPECT_EQ(f(0, 0), 0);
    EXPECT_EQ(f.count(), 25u);
}

TEST(Distance, SquaredEuclidean) {
    BinaryMask m(6, 6, 0);
    m(1, 1) = 1;
    const Plane d = squared_distance_to(m);
    EXPECT_EQ(d(1, 1), 0.0);
    EXPECT_EQ(d(4, 5), 9.0 + 16.0);
    EXPECT_TRUE(std::isinf(squared_distance_to(BinaryMask(3, 3, 0))(1, 1)));
}

TEST(Watershed, SingleMarkerFloodsAll) {
    std::mt19937_64 rng(13);
    const Plane g = random_plane(15, 11, rng);
    LabelMap markers(15, 11, 0);
    markers(7, 5) = 3;
    const LabelMap l = watershed(g, markers);
    for (auto v : l.data()) EXPECT_EQ(v, 3);
}

TEST(Watershed, DoubleWellSplitsAtRidge) {
    const int n = 21;
    Plane g(n, 1);
    for (int x = 0; x < n; ++x) g(x, 0) = 1.0 - std::abs(std::abs(x - 10) - 6) / 6.0;
    g(10, 0) = 2.0;
    LabelMap markers(n, 1, 0);
    markers(4, 0) = 1;
    markers(16, 0) = 2;
    const LabelMap l = watershed(g, markers);
    for (int x = 0; x < 10; ++x) EXPECT_EQ(l(x, 0), 1) << x;
    for (int x = 11; x < n; ++x) EXPECT_EQ(l(x, 0), 2) << x;
}

TEST(Watershed, PartitionProperties) {
    std::mt19937_64 rng(14);
    std::uniform_int_distribution<int> px(0, 39), py(0, 29);
    for (int t = 0; t < 100; ++t) {
        const Plane g = random_plane(40, 30, rng);
        LabelMap markers(40, 30, 0);
        const int ax = px(rng), ay = py(rng);
        int bx = px(rng), by = py(rng);
        while (bx == ax && by == ay) bx = px(rng);
        markers(ax, ay) = 1;
        markers(bx, by) = 2;
        const LabelMap l = watershed(g, markers);
        for (auto v : l.data()) ASSERT_TRUE(v == 1 || v == 2);
        EXPECT_EQ(l(ax, ay), 1);
        EXPECT_EQ(l(bx, by), 2);
        EXPECT_EQ(oracle::flood_components(label_mask(l, 1), false).max_label(), 1);
        EXPECT_EQ(oracle::flood_components(label_mask(l, 2), false).max_label(), 1);
    }
}

TEST(Hough, EmptyMask) {
    EXPECT_TRUE(hough_lines(BinaryMask(20, 20, 0), 1.0, 1).empty());
}

TEST(Hough, HorizontalSegment) {
    BinaryMask m(80, 40, 0);
    for (int x = 10; x < 60; ++x) m(x, 17) = 1;
    const auto lines = hough_lines(m, 1.0, 10);
    ASSERT_FALSE(lines.empty());
    EXPECT_DOUBLE_EQ(lines[0].theta, 90.0);
    EXPECT_EQ(lines[0].score, 50);
    EXPECT_NEAR(lines[0].rho, 17.0, 0.5);
}

TEST(Hough, PerpendicularLines) {
    BinaryMask m(80, 80, 0);
    for (int i = 5; i < 75; ++i) {
        m(i, 30) = 1;
        m(50, i) = 1;
    }
    const auto lines = hough_lines(m, 1.0, 40);
    ASSERT_GE(lines.size(), 2u);
    EXPECT_NEAR(line_angle_distance(lines[0].theta, lines[1].theta), 90.0, 1e-9);
}

TEST(Hough, AngleWindowExcludes) {
    BinaryMask m(80, 40, 0);
    for (int x = 10; x < 60; ++x) m(x, 17) = 1;
    EXPECT_TRUE(hough_lines(m, 1.0, 10, AngleRange{-20, 20}).empty());
}

TEST(Glcm, ConstantSingleCell) {
    const auto g = glcm(Plane(6, 6, 0.3), BinaryMask(6, 6, 1), GlcmAngle::Deg0);
    EXPECT_DOUBLE_EQ(g.at(2, 2), 1.0);
}

TEST(Glcm, TwoByTwoHandCount) {
    Plane p(2, 2);
    p(0, 0) = p(1, 0) = 0.0;
    p(0, 1) = p(1, 1) = 1.0;
    const auto g = glcm(p, BinaryMask(2, 2, 1), GlcmAngle::Deg0);
    EXPECT_DOUBLE_EQ(g.at(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(g.at(7, 7), 0.5);
}

TEST(Glcm, NoPairsFlagged) {
    BinaryMask m(5, 5, 0);
    m(2, 2) = 1;
    const auto g = glcm(Plane(5, 5, 0.5), m, GlcmAngle::Deg45);
    EXPECT_TRUE(g.no_pairs);
    for (double v : g.cells) EXPECT_EQ(v, 0.0);
    const auto s = glcm_stats(g);
    EXPECT_EQ(s.energy, 0.0);
    EXPECT_EQ(s.homogeneity, 0.0);
}

TEST(Glcm, MatchesPairEnumeration) {
    std::mt19937_64 rng(15);
    for (int t = 0; t < 50; ++t) {
        const Plane p = random_plane(16, 16, rng);
        const BinaryMask m = random_mask(16, 16, 0.7, rng);
        for (auto a : kGlcmAngles) {
            const auto g = glcm(p, m, a);
            const auto [dr, dc] = glcm_offset(a);
            bool none = false;
            const auto ref = oracle::glcm(p, m, dr, dc, 8, none);
            EXPECT_EQ(g.no_pairs, none);
            ASSERT_EQ(g.cells, ref);
            double sum = 0;
            for (double v : g.cells) sum += v;
            if (!none) {
                EXPECT_NEAR(sum, 1.0, 1e-9);
            }
        }
    }
}

TEST(GlcmStats, UniformFourCells) {
    GreyCooccurrence g;
    g.levels = 8;
    g.cells.assign(64, 0.0);
    g.cells[0] = g.cells[1] = g.cells[8] = g.cells[9] = 0.25;
    const auto s = glcm_stats(g);
    EXPECT_NEAR(s.entropy, 2.0, 1e-12);
    EXPECT_NEAR(s.energy, 0.25, 1e-12);
    EXPECT_NEAR(s.contrast, 0.5, 1e-12);
    EXPECT_NEAR(s.homogeneity, 0.75, 1e-12);
}

TEST(GlcmStats, ConstantPatch) {
    const auto s = glcm_stats(glcm(Plane(5, 5, 0.9), BinaryMask(5, 5, 1), GlcmAngle::Deg90));
    EXPECT_EQ(s.contrast, 0.0);
    EXPECT_EQ(s.correlation, 0.0);
    EXPECT_EQ(s.energy, 1.0);
    EXPECT_EQ(s.homogeneity, 1.0);
    EXPECT_EQ(s.entropy, 0.0);
}

TEST(GlcmStats, MatchSummationOracleAndBounds) {
    std::mt19937_64 rng(16);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int t = 0; t < 200; ++t) {
        GreyCooccurrence g;
        g.levels = 8;
        g.cells.resize(64);
        double sum = 0;
        for (auto& v : g.cells) sum += (v = u(rng) < 0.3 ? 0.0 : u(rng));
        if (sum == 0) continue;
        for (auto& v : g.cells) v /= sum;
        const auto s = glcm_stats(g);
        const auto o = oracle::glcm_stats(g.cells, 8);
        EXPECT_NEAR(s.contrast, o.contrast, 1e-12);
        EXPECT_NEAR(s.correlation, o.correlation, 1e-12);
        EXPECT_NEAR(s.energy, o.energy, 1e-12);
        EXPECT_NEAR(s.homogeneity, o.homogeneity, 1e-12);
        EXPECT_NEAR(s.entropy, o.entropy, 1e-12);
        EXPECT_GE(s.energy, 0.0);
        EXPECT_LE(s.energy, 1.0);
        EXPECT_GE(s.homogeneity, 0.0);
        EXPECT_LE(s.homogeneity, 1.0);
        EXPECT_GE(s.entropy, 0.0);
        EXPECT_LE(s.entropy, 6.0);
        EXPECT_GE(s.contrast, 0.0);
    }
}
