#pragma once

// 124-dimensional lesion descriptor: masked mean R, G, B, H followed by
// five GLCM statistics for every channel plane {R,G,B,H,S,V} at 0, 45, 90
// and 135 degrees.

#include "leafdx/imaging.hpp"

#include <array>
#include <span>
#include <vector>

namespace leafdx::features {

inline constexpr int kColourFeatures = 4;
inline constexpr int kTextureFeatures = 120;
inline constexpr int kFeatureCount = kColourFeatures + kTextureFeatures;
inline constexpr int kLayoutVersion = 1;
inline constexpr int kGlcmLevels = 8;

using FeatureVector = std::vector<double>;

/// M_ij = 1 iff (i - h/2)^2 + (j - w/2)^2 < (h/4 + w/4)^2 with i the row.
BinaryMask elliptical_mask(int h, int w);

/// Masked means of R, G, B and hue, each in [0,1].
std::array<double, 4> colour_features(const Raster& patch, const BinaryMask& m);

struct TextureResult {
    std::vector<double> values;  // 120 entries
    bool no_pairs = false;       // every GLCM was empty
};

TextureResult texture_features(const Raster& patch, const BinaryMask& m);

/// Colour block then texture block.
FeatureVector assemble(const Raster& patch, const BinaryMask& m);

/// Features of a patch cut from `img` at `box`, masked with elliptical_mask.
FeatureVector patch_features(const Raster& img, const Rect& box);

/// Human-readable name of feature slot i (e.g. "G/45/energy").
std::string feature_name(int index);

struct ScalingParams {
    std::vector<double> min;
    std::vector<double> max;

    std::size_t size() const { return min.size(); }
    friend bool operator==(const ScalingParams&, const ScalingParams&) = default;
};

ScalingParams fit_scaling(std::span<const FeatureVector> train);

/// Affine map of [min,max] onto [-1,1]; constant dimensions map to 0.
FeatureVector apply_scaling(std::span<const double> v, const ScalingParams& s);

}  // namespace leafdx::features
