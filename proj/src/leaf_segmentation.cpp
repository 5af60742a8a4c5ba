#include "leafdx/leaf_segmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace leafdx::leaf {

bool StrokeSet::has_leaf() const {
    return std::any_of(strokes.begin(), strokes.end(),
                       [](const Stroke& s) { return s.label == StrokeLabel::Leaf && !s.points.empty(); });
}

bool is_green(const Hsv& px) {
    const double deg = px.h * 360.0;
    return deg >= 60.0 && deg < 180.0 && px.s >= 0.15 && px.v >= 0.1;
}

LeafSegment describe_segment(BinaryMask mask) {
    LeafSegment seg;
    double n = 0, sx = 0, sy = 0;
    int x0 = mask.width(), y0 = mask.height(), x1 = -1, y1 = -1;
    for (int y = 0; y < mask.height(); ++y)
        for (int x = 0; x < mask.width(); ++x) {
            if (!mask(x, y)) continue;
            n += 1;
            sx += x;
            sy += y;
            x0 = std::min(x0, x);
            y0 = std::min(y0, y);
            x1 = std::max(x1, x);
            y1 = std::max(y1, y);
        }
    seg.area = static_cast<std::size_t>(n);
    if (n > 0) {
        seg.bbox = {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
        const double mx = sx / n, my = sy / n;
        double mu20 = 0, mu02 = 0, mu11 = 0;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                if (!mask(x, y)) continue;
                mu20 += (x - mx) * (x - mx);
                mu02 += (y - my) * (y - my);
                mu11 += (x - mx) * (y - my);
            }
        double deg = 0.5 * std::atan2(2 * mu11, mu20 - mu02) * 180.0 / std::numbers::pi;
        if (deg < 0) deg += 180.0;
        if (deg >= 180.0) deg -= 180.0;
        seg.orientation = deg;
    }
    seg.mask = std::move(mask);
    return seg;
}

namespace {

void paint_stroke(MarkerMask& out, const Stroke& s, std::int32_t label, bool overwrite_only_empty) {
    if (s.points.empty()) return;
    const double r = s.radius;
    const double r2 = r * r;
    auto paint_segment = [&](Point2 a, Point2 b) {
        const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a.x, b.x) - r)));
        const int x1 = std::min(out.width() - 1, static_cast<int>(std::ceil(std::max(a.x, b.x) + r)));
        const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a.y, b.y) - r)));
        const int y1 = std::min(out.height() - 1, static_cast<int>(std::ceil(std::max(a.y, b.y) + r)));
        const double dx = b.x - a.x, dy = b.y - a.y;
        const double len2 = dx * dx + dy * dy;
        for (int y = y0; y <= y1; ++y)
            for (int x = x0; x <= x1; ++x) {
                double t = len2 > 0 ? ((x - a.x) * dx + (y - a.y) * dy) / len2 : 0.0;
                t = std::clamp(t, 0.0, 1.0);
                const double px = a.x + t * dx - x, py = a.y + t * dy - y;
                if (px * px + py * py > r2) continue;
                if (overwrite_only_empty && out(x, y) != kNoMarker) continue;
                out(x, y) = label;
            }
    };
    if (s.points.size() == 1) paint_segment(s.points[0], s.points[0]);
    for (std::size_t i = 1; i < s.points.size(); ++i) paint_segment(s.points[i - 1], s.points[i]);
}

void check_radii(const StrokeSet& strokes) {
    for (const auto& s : strokes.strokes)
        if (!(s.radius >= 1.0)) throw Error(ErrorCode::InvalidArgument, "stroke radius must be >= 1");
}

// Erosion that treats everything outside the image as set, so texture
// running off the border stays connected to it.
BinaryMask erode_open_border(const BinaryMask& m, int radius) {
    const int w = m.width(), h = m.height();
    BinaryMask padded(w + 2 * radius, h + 2 * radius, 1);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) padded(x + radius, y + radius) = m(x, y);
    const BinaryMask e = erode(padded, radius);
    BinaryMask out(w, h);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) out(x, y) = e(x + radius, y + radius);
    return out;
}

}  // namespace

MarkerMask rasterise_strokes(const StrokeSet& strokes, int width, int height) {
    check_radii(strokes);
    MarkerMask out(width, height, kNoMarker);
    // Leaf first, then background on top.
    for (const auto& s : strokes.strokes)
        if (s.label == StrokeLabel::Leaf) paint_stroke(out, s, kLeafMarker, false);
    for (const auto& s : strokes.strokes)
        if (s.label == StrokeLabel::Background) paint_stroke(out, s, kBackgroundMarker, false);
    return out;
}

MarkerMask strokes_to_marker(const StrokeSet& strokes, int width, int height) {
    if (!strokes.has_leaf()) throw Error(ErrorCode::NoLeafStroke, "no leaf stroke");
    MarkerMask out = rasterise_strokes(strokes, width, height);
    if (std::none_of(out.data().begin(), out.data().end(), [](auto v) { return v == kLeafMarker; }))
        throw Error(ErrorCode::NoLeafStroke, "leaf strokes fall outside the image or are overwritten");
    return out;
}

MarkerMask synthesize_background_marker(const Raster& img, const MarkerMask& user,
                                        const BackgroundOptions& opts) {
    if (img.width() != user.width() || img.height() != user.height())
        throw Error(ErrorCode::DimensionMismatch, "markers do not match the image");
    BinaryMask user_leaf(user.width(), user.height());
    for (std::size_t i = 0; i < user.size(); ++i) user_leaf[i] = user[i] == kLeafMarker;
    if (user_leaf.count() == 0) throw Error(ErrorCode::NoLeafStroke, "markers hold no leaf pixel");

    const HsvPlanes hsv = rgb_to_hsv(img);
    BinaryMask evidence(img.width(), img.height());
    for (std::size_t i = 0; i < evidence.size(); ++i)
        evidence[i] = !is_green({hsv.h[i], hsv.s[i], hsv.v[i]});

    // Texture: entropy above its own Otsu cut. A window straddling an edge
    // reads as textured up to entropy_radius px inside the smooth side, so
    // the evidence is eroded past that reach.
    const Plane entropy = local_entropy(rgb_to_grey(img), opts.entropy_radius);
    double cut = opts.min_entropy_bits;
    std::array<std::uint64_t, 256> hist{};
    for (double e : entropy.data()) ++hist[std::min(255, static_cast<int>(e / 8.0 * 255.0 + 0.5))];
    try {
        cut = std::max(cut, (otsu_cut(hist) + 0.5) / 255.0 * 8.0);
    } catch (const Error&) {
        // flat entropy: no texture evidence beyond the absolute floor
    }
    const BinaryMask textured = erode_open_border(threshold_above(entropy, cut), opts.entropy_radius + 1);
    evidence = mask_or(evidence, textured);

    // Keep clear of the seeded leaf, and keep only evidence connected to the
    // image border so lesions enclosed by the leaf never seed background.
    evidence = mask_and_not(evidence, dilate(user_leaf, opts.exclusion_radius));
    const LabelMap comps = connected_components(evidence, Connectivity::Eight);
    std::vector<char> touches(static_cast<std::size_t>(comps.max_label()) + 1, 0);
    const int w = comps.width(), h = comps.height();
    for (int x = 0; x < w; ++x) {
        touches[comps(x, 0)] = 1;
        touches[comps(x, h - 1)] = 1;
    }
    for (int y = 0; y < h; ++y) {
        touches[comps(0, y)] = 1;
        touches[comps(w - 1, y)] = 1;
    }
    touches[0] = 0;

    MarkerMask out = user;
    bool any_background = false;
    for (std::size_t i = 0; i < out.size(); ++i) {
        if (out[i] == kNoMarker && touches[comps[i]]) out[i] = kBackgroundMarker;
        any_background |= out[i] == kBackgroundMarker;
    }
    if (!any_background)
        throw Error(ErrorCode::InsufficientBackground, "insufficient background evidence");
    return out;
}

MarkerMask border_ring_fallback(const MarkerMask& user, int width) {
    MarkerMask out = user;
    for (int y = 0; y < out.height(); ++y)
        for (int x = 0; x < out.width(); ++x) {
            const bool ring =
                x < width || y < width || x >= out.width() - width || y >= out.height() - width;
            if (ring && out(x, y) == kNoMarker) out(x, y) = kBackgroundMarker;
        }
    return out;
}

MarkerMask build_markers(const Raster& img, const MarkerMask& user, const BackgroundOptions& opts) {
    try {
        return synthesize_background_marker(img, user, opts);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::InsufficientBackground) throw;
        return border_ring_fallback(user, opts.border_ring);
    }
}

LeafSegment extract_leaf(const Raster& img, const MarkerMask& markers) {
    if (img.width() != markers.width() || img.height() != markers.height())
        throw Error(ErrorCode::DimensionMismatch, "markers do not match the image");
    const Plane gradient = sobel_magnitude(rgb_to_grey(img));
    const LabelMap regions = watershed(gradient, markers);
    LeafSegment seg = describe_segment(label_mask(regions, kLeafMarker));
    if (seg.area == 0) throw Error(ErrorCode::NoMarkers, "markers hold no leaf pixel");
    seg.markers = markers;
    return seg;
}

LeafSegment refine_with_labels(const Raster& img, const LeafSegment& prev, const StrokeSet& extra) {
    if (extra.strokes.empty() ||
        std::all_of(extra.strokes.begin(), extra.strokes.end(),
                    [](const Stroke& s) { return s.points.empty(); }))
        throw Error(ErrorCode::InvalidArgument, "refine_with_labels: no extra strokes");
    MarkerMask merged = prev.markers;
    if (merged.empty()) {
        // No record of the old markers: seed the old leaf interior instead.
        merged = MarkerMask(img.width(), img.height(), kNoMarker);
        const BinaryMask core = erode(prev.mask, 2);
        for (std::size_t i = 0; i < merged.size(); ++i)
            if (core[i]) merged[i] = kLeafMarker;
        merged = border_ring_fallback(merged, 3);
    }
    const MarkerMask fresh = rasterise_strokes(extra, img.width(), img.height());
    for (std::size_t i = 0; i < merged.size(); ++i)
        if (fresh[i] != kNoMarker) merged[i] = fresh[i];
    return extract_leaf(img, merged);
}

LeafSegment segment_leaf(const Raster& img, const StrokeSet& strokes, const BackgroundOptions& opts) {
    const MarkerMask user = strokes_to_marker(strokes, img.width(), img.height());
    return extract_leaf(img, build_markers(img, user, opts));
}

}  // namespace leafdx::leaf
