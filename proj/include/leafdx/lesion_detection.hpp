#pragma once

// Disease-affected areas on an extracted leaf: non-green pixels minus the
// primary vein, plus dark/white spots, cut into bounded feature windows.

#include "leafdx/leaf_segmentation.hpp"

#include <optional>
#include <vector>

namespace leafdx::lesion {

struct DetectionOptions {
    double vein_band_width = 5.0;      // px, centred on the vein line
    double vein_vote_fraction = 0.4;   // of the leaf's longer bbox side
    double vein_angle_window = 20.0;   // degrees either side of the leaf axis
    int noise_max_side = 3;            // components with bbox <= 3x3 are dropped
    int min_patch = 10;
    int max_patch = 25;
    double tile_occupancy = 0.3;
};

struct LesionMap {
    BinaryMask mask;
    std::optional<LineParam> vein_line;
    BinaryMask spot_mask;
};

struct LesionPatch {
    Rect bbox;
    bool large_region_label = false;
    std::int32_t source_component = 0;

    friend bool operator==(const LesionPatch&, const LesionPatch&) = default;
};

BinaryMask nongreen_mask(const Raster& img, const leaf::LeafSegment& leaf);

/// Hough search over `candidates` limited to lines within the angle window of
/// the leaf axis; reports the strongest line when it collects enough votes.
std::optional<LineParam> detect_primary_vein(const leaf::LeafSegment& leaf,
                                             const BinaryMask& candidates,
                                             const DetectionOptions& opts = {});

/// Black (V <= 0.15) or white (V >= 0.9, S <= 0.15) pixels inside the leaf.
BinaryMask spot_mask(const Raster& img, const leaf::LeafSegment& leaf);

/// Pixels within half the band width of a line.
BinaryMask line_band(int width, int height, const LineParam& line, double band_width);

LesionMap build_affected_mask(const Raster& img, const leaf::LeafSegment& leaf,
                              const DetectionOptions& opts = {});

std::vector<LesionPatch> tile_patches(const LesionMap& lm, const DetectionOptions& opts = {});

/// Smallest rectangle of at least `min_side` per side containing `box`,
/// grown about its centre and shifted to stay inside the image.
Rect grow_to_min(const Rect& box, int min_side, int width, int height);

double compute_severity(const LesionMap& lm, const leaf::LeafSegment& leaf);

}  // namespace leafdx::lesion
