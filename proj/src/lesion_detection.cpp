#include "leafdx/lesion_detection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace leafdx::lesion {

BinaryMask nongreen_mask(const Raster& img, const leaf::LeafSegment& leaf) {
    if (leaf.area == 0) throw Error(ErrorCode::EmptyMask, "nongreen_mask: empty leaf");
    BinaryMask out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (!leaf.mask(x, y)) continue;
            const auto px = img.rgb(x, y);
            out(x, y) = !leaf::is_green(rgb_to_hsv(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0));
        }
    return out;
}

std::optional<LineParam> detect_primary_vein(const leaf::LeafSegment& leaf,
                                             const BinaryMask& candidates,
                                             const DetectionOptions& opts) {
    if (leaf.area == 0) return std::nullopt;
    // Hough theta is the line normal; the vein runs along the leaf axis.
    const double normal = std::fmod(leaf.orientation + 90.0, 180.0);
    const AngleRange band{normal - opts.vein_angle_window, normal + opts.vein_angle_window};
    const double length = std::max(leaf.bbox.w, leaf.bbox.h);
    const int min_votes = std::max(1, static_cast<int>(std::ceil(opts.vein_vote_fraction * length)));
    const auto lines = hough_lines(candidates, 1.0, min_votes, band);
    if (lines.empty()) return std::nullopt;
    LineParam best = refine_line(candidates, lines.front(), 3.0);
    if (line_angle_distance(best.theta, normal) > opts.vein_angle_window) best = lines.front();
    return best;
}

BinaryMask spot_mask(const Raster& img, const leaf::LeafSegment& leaf) {
    if (leaf.area == 0) throw Error(ErrorCode::EmptyMask, "spot_mask: empty leaf");
    BinaryMask out(img.width(), img.height());
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (!leaf.mask(x, y)) continue;
            const auto px = img.rgb(x, y);
            const Hsv hsv = rgb_to_hsv(px[0] / 255.0, px[1] / 255.0, px[2] / 255.0);
            out(x, y) = hsv.v <= 0.15 || (hsv.v >= 0.9 && hsv.s <= 0.15);
        }
    return out;
}

BinaryMask line_band(int width, int height, const LineParam& line, double band_width) {
    BinaryMask out(width, height);
    const double t = line.theta * std::numbers::pi / 180.0;
    const double c = std::cos(t), s = std::sin(t);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x)
            out(x, y) = std::abs(x * c + y * s - line.rho) <= band_width / 2.0;
    return out;
}

LesionMap build_affected_mask(const Raster& img, const leaf::LeafSegment& leaf,
                              const DetectionOptions& opts) {
    LesionMap lm;
    const BinaryMask nongreen = nongreen_mask(img, leaf);
    lm.spot_mask = spot_mask(img, leaf);
    lm.vein_line = detect_primary_vein(leaf, nongreen, opts);
    BinaryMask affected = mask_or(nongreen, lm.spot_mask);
    if (lm.vein_line) {
        affected = mask_and_not(affected, line_band(img.width(), img.height(), *lm.vein_line,
                                                    opts.vein_band_width));
        affected = mask_or(affected, lm.spot_mask);
    }
    lm.mask = std::move(affected);
    return lm;
}

Rect grow_to_min(const Rect& box, int min_side, int width, int height) {
    Rect r = box;
    if (r.w < min_side) {
        r.x -= (min_side - r.w) / 2;
        r.w = min_side;
    }
    if (r.h < min_side) {
        r.y -= (min_side - r.h) / 2;
        r.h = min_side;
    }
    r.w = std::min(r.w, width);
    r.h = std::min(r.h, height);
    r.x = std::clamp(r.x, 0, width - r.w);
    r.y = std::clamp(r.y, 0, height - r.h);
    return r;
}

std::vector<LesionPatch> tile_patches(const LesionMap& lm, const DetectionOptions& opts) {
    std::vector<LesionPatch> out;
    if (lm.mask.empty()) return out;
    const int w = lm.mask.width(), h = lm.mask.height();
    const LabelMap comps = connected_components(lm.mask, Connectivity::Four);
    const auto boxes = label_boxes(comps);
    const int side = opts.max_patch;

    for (std::size_t label = 1; label < boxes.size(); ++label) {
        const Rect& b = boxes[label];
        const auto id = static_cast<std::int32_t>(label);
        if (b.w <= opts.noise_max_side && b.h <= opts.noise_max_side) continue;
        if (b.w <= side && b.h <= side) {
            out.push_back({grow_to_min(b, opts.min_patch, w, h), false, id});
            continue;
        }
        // Large component: 25x25 windows on a stride-25 grid from the bbox
        // origin, kept when enough of the window is this component.
        const int nx = (b.w + side - 1) / side, ny = (b.h + side - 1) / side;
        std::vector<LesionPatch> kept;
        LesionPatch densest;
        int densest_count = -1;
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i) {
                Rect win{b.x + i * side, b.y + j * side, side, side};
                win = grow_to_min(win, side, w, h);
                int count = 0;
                for (int y = win.y; y < win.bottom(); ++y)
                    for (int x = win.x; x < win.right(); ++x) count += comps(x, y) == id;
                const LesionPatch patch{win, true, id};
                if (count >= opts.tile_occupancy * win.w * win.h) kept.push_back(patch);
                if (count > densest_count) {
                    densest_count = count;
                    densest = patch;
                }
            }
        if (kept.empty()) kept.push_back(densest);
        out.insert(out.end(), kept.begin(), kept.end());
    }
    return out;
}

double compute_severity(const LesionMap& lm, const leaf::LeafSegment& leaf) {
    if (leaf.area == 0) throw Error(ErrorCode::EmptyMask, "compute_severity: empty leaf");
    std::size_t affected = 0;
    for (std::size_t i = 0; i < lm.mask.size(); ++i) affected += lm.mask[i] && leaf.mask[i];
    return static_cast<double>(affected) / static_cast<double>(leaf.area);
}

}  // namespace leafdx::lesion
