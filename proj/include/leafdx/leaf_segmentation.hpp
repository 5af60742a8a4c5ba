#pragma once

// Scribble-seeded leaf extraction: user strokes plus automatic background
// evidence become watershed markers on the Sobel gradient of the grey image.

#include "leafdx/imaging.hpp"

#include <vector>

namespace leafdx::leaf {

enum class StrokeLabel { Leaf, Background };

struct Stroke {
    std::vector<Point2> points;  // polyline in image pixels
    double radius = 1.0;         // pen half-width
    StrokeLabel label = StrokeLabel::Leaf;

    friend bool operator==(const Stroke&, const Stroke&) = default;
};

struct StrokeSet {
    std::vector<Stroke> strokes;

    bool has_leaf() const;
    friend bool operator==(const StrokeSet&, const StrokeSet&) = default;
};

inline constexpr std::int32_t kNoMarker = 0;
inline constexpr std::int32_t kLeafMarker = 1;
inline constexpr std::int32_t kBackgroundMarker = 2;

/// LabelMap restricted to {kNoMarker, kLeafMarker, kBackgroundMarker}.
using MarkerMask = LabelMap;

struct LeafSegment {
    BinaryMask mask;
    Rect bbox;
    std::size_t area = 0;
    double orientation = 0.0;  // major-axis direction in degrees, [0,180), x right / y down
    MarkerMask markers;        // markers that produced the mask (empty when unknown)
};

/// Summary of a mask: tight box, pixel count and moment-based orientation.
LeafSegment describe_segment(BinaryMask mask);

/// Green band shared with lesion detection: H in [60,180) degrees,
/// S >= 0.15 and V >= 0.1.
bool is_green(const Hsv& px);

/// Rasterise each stroke as a disc swept along its polyline; background
/// wins where labels overlap. Throws NoLeafStroke without a leaf stroke.
MarkerMask strokes_to_marker(const StrokeSet& strokes, int width, int height);

struct BackgroundOptions {
    int exclusion_radius = 20;  // around user leaf pixels
    int entropy_radius = 4;
    double min_entropy_bits = 1.5;
    int border_ring = 3;
};

/// Adds automatic background (non-green or high local entropy, away from
/// the leaf scribble) to the user markers. Only evidence connected to the
/// image border counts. User labels take precedence.
/// Throws InsufficientBackground when no background pixel results.
MarkerMask synthesize_background_marker(const Raster& img, const MarkerMask& user,
                                        const BackgroundOptions& opts = {});

/// Background = a ring of `width` pixels along the image border, leaving
/// user markers untouched.
MarkerMask border_ring_fallback(const MarkerMask& user, int width);

/// Synthesis with the border-ring fallback applied on empty evidence.
MarkerMask build_markers(const Raster& img, const MarkerMask& user,
                         const BackgroundOptions& opts = {});

LeafSegment extract_leaf(const Raster& img, const MarkerMask& markers);

/// Rasterises strokes without requiring a leaf stroke.
MarkerMask rasterise_strokes(const StrokeSet& strokes, int width, int height);

/// Re-runs the extraction with prev.markers merged with the extra strokes
/// (background wins); new strokes need not include a leaf stroke.
LeafSegment refine_with_labels(const Raster& img, const LeafSegment& prev, const StrokeSet& extra);

/// One-shot: strokes -> markers (with synthesis) -> leaf.
LeafSegment segment_leaf(const Raster& img, const StrokeSet& strokes,
                         const BackgroundOptions& opts = {});

}  // namespace leafdx::leaf
