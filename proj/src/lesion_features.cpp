#include "leafdx/lesion_features.hpp"

#include <string>

namespace leafdx::features {

BinaryMask elliptical_mask(int h, int w) {
    if (h < 1 || w < 1) throw Error(ErrorCode::InvalidArgument, "elliptical_mask: size must be >= 1");
    BinaryMask m(w, h);
    const double ci = h / 2.0, cj = w / 2.0;
    const double r = h / 4.0 + w / 4.0;
    for (int i = 0; i < h; ++i)
        for (int j = 0; j < w; ++j) m(j, i) = (i - ci) * (i - ci) + (j - cj) * (j - cj) < r * r;
    return m;
}

namespace {

void check_inputs(const Raster& patch, const BinaryMask& m) {
    if (patch.channels() != 3) throw Error(ErrorCode::InvalidArgument, "features need an RGB patch");
    if (patch.width() != m.width() || patch.height() != m.height())
        throw Error(ErrorCode::DimensionMismatch, "feature mask does not match the patch");
    if (m.count() == 0) throw Error(ErrorCode::EmptyMask, "feature mask is empty");
}

}  // namespace

std::array<double, 4> colour_features(const Raster& patch, const BinaryMask& m) {
    check_inputs(patch, m);
    std::array<double, 4> sum{};
    double n = 0;
    for (int y = 0; y < patch.height(); ++y)
        for (int x = 0; x < patch.width(); ++x) {
            if (!m(x, y)) continue;
            const auto px = patch.rgb(x, y);
            const double r = px[0] / 255.0, g = px[1] / 255.0, b = px[2] / 255.0;
            sum[0] += r;
            sum[1] += g;
            sum[2] += b;
            sum[3] += rgb_to_hsv(r, g, b).h;
            n += 1;
        }
    for (auto& s : sum) s /= n;
    return sum;
}

TextureResult texture_features(const Raster& patch, const BinaryMask& m) {
    check_inputs(patch, m);
    const HsvPlanes hsv = rgb_to_hsv(patch);
    const std::array<Plane, 6> planes = {channel_plane(patch, 0), channel_plane(patch, 1),
                                         channel_plane(patch, 2), hsv.h, hsv.s, hsv.v};
    TextureResult out;
    out.values.reserve(kTextureFeatures);
    bool all_empty = true;
    for (const Plane& plane : planes)
        for (GlcmAngle angle : kGlcmAngles) {
            const GreyCooccurrence g = glcm(plane, m, angle, kGlcmLevels, 1);
            all_empty &= g.no_pairs;
            const GlcmStats s = glcm_stats(g);
            out.values.insert(out.values.end(),
                              {s.contrast, s.correlation, s.energy, s.homogeneity, s.entropy});
        }
    out.no_pairs = all_empty;
    return out;
}

FeatureVector assemble(const Raster& patch, const BinaryMask& m) {
    const auto colour = colour_features(patch, m);
    const auto texture = texture_features(patch, m);
    FeatureVector v(colour.begin(), colour.end());
    v.insert(v.end(), texture.values.begin(), texture.values.end());
    return v;
}

FeatureVector patch_features(const Raster& img, const Rect& box) {
    const Raster patch = img.crop(box.x, box.y, box.w, box.h);
    return assemble(patch, elliptical_mask(box.h, box.w));
}

std::string feature_name(int index) {
    static constexpr const char* colour[] = {"mean_r", "mean_g", "mean_b", "mean_h"};
    static constexpr const char* channel[] = {"R", "G", "B", "H", "S", "V"};
    static constexpr const char* angle[] = {"0", "45", "90", "135"};
    static constexpr const char* stat[] = {"contrast", "correlation", "energy", "homogeneity",
                                           "entropy"};
    if (index < 0 || index >= kFeatureCount)
        throw Error(ErrorCode::InvalidArgument, "feature index out of range");
    if (index < kColourFeatures) return colour[index];
    const int t = index - kColourFeatures;
    return std::string(channel[t / 20]) + "/" + angle[(t / 5) % 4] + "/" + stat[t % 5];
}

ScalingParams fit_scaling(std::span<const FeatureVector> train) {
    if (train.empty()) throw Error(ErrorCode::InvalidArgument, "fit_scaling: empty training set");
    ScalingParams s{train.front(), train.front()};
    for (const auto& v : train) {
        if (v.size() != s.size())
            throw Error(ErrorCode::DimensionMismatch, "fit_scaling: vectors differ in length");
        for (std::size_t d = 0; d < v.size(); ++d) {
            s.min[d] = std::min(s.min[d], v[d]);
            s.max[d] = std::max(s.max[d], v[d]);
        }
    }
    return s;
}

FeatureVector apply_scaling(std::span<const double> v, const ScalingParams& s) {
    if (v.size() != s.size())
        throw Error(ErrorCode::DimensionMismatch, "apply_scaling: dimension mismatch");
    FeatureVector out(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) {
        const double span = s.max[d] - s.min[d];
        out[d] = span > 0 ? 2.0 * (v[d] - s.min[d]) / span - 1.0 : 0.0;
    }
    return out;
}

}  // namespace leafdx::features
