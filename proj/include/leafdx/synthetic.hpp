#pragma once

// Procedural test imagery: rendered calibration charts, chartless clutter and
// leaves carrying lesions from six disease archetypes. Every generator is a
// pure function of its parameters and seed.

#include "leafdx/colour_calibration.hpp"
#include "leafdx/leaf_segmentation.hpp"

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace leafdx::synth {

struct ChartScene {
    int width = 800;
    int height = 600;
    double pixels_per_unit = 3.0;  // at scale 1
    double scale = 1.0;
    double rotation_deg = 0.0;
    Point2 centre{400.0, 300.0};
    double noise_sigma = 2.0 / 255.0;
    std::uint64_t seed = 1;
    /// Camera response applied to the chart and background colours.
    std::optional<calib::ColourTransform> distortion;
};

struct RenderedChart {
    Raster image;
    std::array<Point2, 4> corners{};  // TL, TR, BR, BL of the black frame's outer edge
    std::vector<calib::Rgb> patch_truth;  // noiseless rendered colour per patch id
};

RenderedChart render_chart(const calib::ChartSpec& spec, const ChartScene& scene);

/// Random scene parameters: rotation within +/-15 deg, scale in [0.5, 2].
ChartScene random_chart_scene(std::uint64_t seed, int width = 800, int height = 600);

/// Textured background with rectangles and blobs but no chart.
Raster render_clutter(int width, int height, std::uint64_t seed);

enum class Archetype { Anthracnose, GallFlies, GreyLeafSpot, RedRust, PowderyMildew, SootyMould };
inline constexpr int kArchetypeCount = 6;

/// Catalog id of the disease an archetype imitates.
std::string archetype_id(Archetype a);

struct LeafSceneOptions {
    int width = 480;
    int height = 360;
    double noise_sigma = 2.0 / 255.0;
    double stroke_radius = 5.0;
    bool draw_midrib = true;
};

struct LeafScene {
    Raster image;
    BinaryMask leaf;     // ground-truth silhouette
    BinaryMask lesions;  // ground-truth affected pixels
    std::vector<Rect> lesion_boxes;
    leaf::StrokeSet strokes;  // one leaf scribble along the axis
    Point2 centre{};
    double orientation = 0.0;  // degrees, [0,180)
    double semi_major = 0.0;
    double semi_minor = 0.0;
};

LeafScene render_leaf(std::optional<Archetype> archetype, std::uint64_t seed,
                      const LeafSceneOptions& opts = {});

struct PatchSample {
    Raster patch;
    int label = 0;  // archetype index
};

/// Lesion patches picked by the automatic detector on rendered leaves:
/// `per_class` for every archetype, leaf seeds seed_base + 1000 * class + i.
std::vector<PatchSample> harvest_patches(int per_class, std::uint64_t seed_base);

}  // namespace leafdx::synth
