#pragma once

// Custom 24-patch chart: its model, detection in a photo, and the weighted
// least-squares colour mapping fitted from the detected patches.

#include "leafdx/imaging.hpp"

#include <array>
#include <span>
#include <vector>

namespace leafdx::calib {

using Rgb = std::array<double, 3>;  // channels in [0,1]

struct Lab {
    double L = 0.0;
    double a = 0.0;
    double b = 0.0;
};

/// CIE L*a*b* (D65 white) to gamma-encoded sRGB, clipped to the gamut.
Rgb lab_to_srgb(const Lab& lab);

/// Physical layout in model units. The chart quadrilateral is the outer edge
/// of the black frame; from outside in: white margin, black frame, white
/// frame, black panel holding a rows x cols grid of square patches.
struct ChartLayout {
    int rows = 4;
    int cols = 6;
    double patch = 10.0;
    double gap = 2.0;
    double white_frame = 4.0;
    double black_frame = 4.0;
    double margin = 4.0;

    double panel_width() const { return cols * patch + (cols + 1) * gap; }
    double panel_height() const { return rows * patch + (rows + 1) * gap; }
    double width() const { return panel_width() + 2 * (white_frame + black_frame); }
    double height() const { return panel_height() + 2 * (white_frame + black_frame); }
    /// Top-left corner of a patch cell in model coordinates.
    Point2 cell_origin(int row, int col) const;

    friend bool operator==(const ChartLayout&, const ChartLayout&) = default;
};

struct ChartPatch {
    int id = 0;
    int group = 1;  // 1 achromatic, 2 primaries/secondaries, 3 greens
    Rgb reference_rgb{};
    Lab reference_lab{};
    int row = 0;
    int col = 0;

    friend bool operator==(const ChartPatch& a, const ChartPatch& b) {
        return a.id == b.id && a.group == b.group && a.reference_rgb == b.reference_rgb &&
               a.reference_lab.L == b.reference_lab.L && a.reference_lab.a == b.reference_lab.a &&
               a.reference_lab.b == b.reference_lab.b && a.row == b.row && a.col == b.col;
    }
};

inline constexpr int kPatchCount = 24;

struct ChartSpec {
    std::vector<ChartPatch> patches;
    ChartLayout layout;

    /// The shipped design: 6 achromatic steps, 9 primaries/secondaries,
    /// 9 greens at L* 25/50/75 with (a*,b*) in {(-65,65), (-65,0), (0,65)}.
    static ChartSpec standard();

    /// Throws InvalidArgument when a structural invariant is broken.
    void validate() const;

    std::vector<Rgb> reference_values() const;

    friend bool operator==(const ChartSpec&, const ChartSpec&) = default;
};

/// Projective map, row-major 3x3.
struct Homography {
    std::array<double, 9> h{1, 0, 0, 0, 1, 0, 0, 0, 1};

    Point2 apply(Point2 p) const;
    Homography inverse() const;

    /// Exact map of four source points onto four destination points.
    static Homography from_points(std::span<const Point2, 4> src, std::span<const Point2, 4> dst);
};

struct ChartDetection {
    std::array<Point2, 4> corners{};  // TL, TR, BR, BL of the chart quadrilateral
    std::vector<Rgb> patch_values;    // one per patch id
    Homography homography;            // model -> image
    std::array<Point2, 4> outline{};  // outer edge of the white margin, same order
};

ChartDetection detect_chart(const Raster& img, const ChartSpec& spec);

/// Mean RGB of each patch over the central half (per side) of its cell.
std::vector<Rgb> sample_patches(const Raster& img, const ChartSpec& spec, const Homography& h);

/// Whether the pixel centre lies inside a convex quadrilateral (never for a
/// quad collapsed to a point or segment).
bool inside_quad(const std::array<Point2, 4>& quad, Point2 p);

struct PatchWeights {
    std::vector<double> w;

    friend bool operator==(const PatchWeights&, const PatchWeights&) = default;
};

inline constexpr double kWeightFloor = 1.0 / 240.0;

PatchWeights uniform_weights(std::size_t n = kPatchCount);

/// Share of non-chart pixels whose nearest patch (RGB Euclidean) is k,
/// plus the floor kWeightFloor.
PatchWeights compute_patch_weights(const Raster& img, const ChartDetection& detection);

enum class TransformKind { Linear, Quadratic };

/// Feature expansion: linear [R,G,B,1]; quadratic
/// [R,G,B,R^2,G^2,B^2,RG,RB,GB,1].
std::vector<double> colour_terms(TransformKind kind, const Rgb& rgb);
int term_count(TransformKind kind);

struct ColourTransform {
    TransformKind kind = TransformKind::Linear;
    std::vector<double> matrix;  // 3 x term_count(kind), row-major
    PatchWeights fitted_weights;
    double residual_rms = 0.0;

    Rgb apply(const Rgb& rgb) const;
    static ColourTransform identity(TransformKind kind);

    friend bool operator==(const ColourTransform&, const ColourTransform&) = default;
};

/// Minimises sum_k w_k |M phi(source_k) - target_k|^2. residual_rms is the
/// unweighted RMS over all patch channels.
ColourTransform fit_transform(std::span<const Rgb> source, std::span<const Rgb> target,
                              const PatchWeights& weights, TransformKind kind);

/// Per-pixel mapping, clamped to [0,1] and requantised (round half up).
Raster apply_transform(const Raster& img, const ColourTransform& t);

struct CalibrationResult {
    ChartDetection detection;
    PatchWeights weights;
    ColourTransform transform;
};

/// detect -> weigh -> fit against the spec's reference values.
CalibrationResult calibrate(const Raster& img, const ChartSpec& spec, TransformKind kind);

}  // namespace leafdx::calib
