#include "leafdx/colour_calibration.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <optional>
#include <set>
#include <unordered_map>

namespace leafdx::calib {

// ---------------------------------------------------------------- colour

namespace {

constexpr double kXn = 0.95047, kYn = 1.0, kZn = 1.08883;

double srgb_encode(double c) {
    c = std::clamp(c, 0.0, 1.0);
    return c <= 0.0031308 ? 12.92 * c : 1.055 * std::pow(c, 1.0 / 2.4) - 0.055;
}

double srgb_decode(double c) {
    return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

Lab srgb_to_lab(const Rgb& rgb) {
    const double r = srgb_decode(rgb[0]), g = srgb_decode(rgb[1]), b = srgb_decode(rgb[2]);
    const double x = (0.4124564 * r + 0.3575761 * g + 0.1804375 * b) / kXn;
    const double y = (0.2126729 * r + 0.7151522 * g + 0.0721750 * b) / kYn;
    const double z = (0.0193339 * r + 0.1191920 * g + 0.9503041 * b) / kZn;
    auto f = [](double t) {
        constexpr double d = 6.0 / 29.0;
        return t > d * d * d ? std::cbrt(t) : t / (3 * d * d) + 4.0 / 29.0;
    };
    return {116 * f(y) - 16, 500 * (f(x) - f(y)), 200 * (f(y) - f(z))};
}

}  // namespace

Rgb lab_to_srgb(const Lab& lab) {
    const double fy = (lab.L + 16.0) / 116.0;
    const double fx = fy + lab.a / 500.0;
    const double fz = fy - lab.b / 200.0;
    auto finv = [](double t) {
        constexpr double d = 6.0 / 29.0;
        return t > d ? t * t * t : 3 * d * d * (t - 4.0 / 29.0);
    };
    const double x = kXn * finv(fx), y = kYn * finv(fy), z = kZn * finv(fz);
    const double r = 3.2404542 * x - 1.5371385 * y - 0.4985314 * z;
    const double g = -0.9692660 * x + 1.8760108 * y + 0.0415560 * z;
    const double b = 0.0556434 * x - 0.2040259 * y + 1.0572252 * z;
    return {srgb_encode(r), srgb_encode(g), srgb_encode(b)};
}

// ---------------------------------------------------------------- chart spec

Point2 ChartLayout::cell_origin(int row, int col) const {
    const double inset = black_frame + white_frame + gap;
    return {inset + col * (patch + gap), inset + row * (patch + gap)};
}

ChartSpec ChartSpec::standard() {
    ChartSpec spec;
    auto add_rgb = [&](int group, Rgb rgb) {
        const int id = static_cast<int>(spec.patches.size());
        spec.patches.push_back({id, group, rgb, srgb_to_lab(rgb), id / 6, id % 6});
    };
    auto add_lab = [&](int group, Lab lab) {
        const int id = static_cast<int>(spec.patches.size());
        spec.patches.push_back({id, group, lab_to_srgb(lab), lab, id / 6, id % 6});
    };
    for (double L : {8.0, 28.0, 45.0, 62.0, 80.0, 96.0}) add_lab(1, {L, 0.0, 0.0});
    for (Rgb c : {Rgb{1, 0, 0}, Rgb{0, 1, 0}, Rgb{0, 0, 1}, Rgb{0, 1, 1}, Rgb{1, 0, 1}, Rgb{1, 1, 0},
                  Rgb{1, 0.5, 0.5}, Rgb{0.5, 1, 0.5}, Rgb{0.5, 0.5, 1}})
        add_rgb(2, c);
    for (double L : {25.0, 50.0, 75.0})
        for (auto [a, b] : {std::pair{-65.0, 65.0}, std::pair{-65.0, 0.0}, std::pair{0.0, 65.0}})
            add_lab(3, {L, a, b});
    return spec;
}

void ChartSpec::validate() const {
    if (patches.size() != kPatchCount)
        throw Error(ErrorCode::InvalidArgument, "chart spec must contain exactly 24 patches");
    if (layout.rows * layout.cols != kPatchCount)
        throw Error(ErrorCode::InvalidArgument, "chart layout must hold 24 cells");
    std::set<int> ids, cells;
    int greens = 0;
    for (const auto& p : patches) {
        if (p.id < 0 || p.id >= kPatchCount || !ids.insert(p.id).second)
            throw Error(ErrorCode::InvalidArgument, "chart patch ids must be unique in 0..23");
        if (p.group < 1 || p.group > 3)
            throw Error(ErrorCode::InvalidArgument, "chart patch group must be 1, 2 or 3");
        if (p.row < 0 || p.row >= layout.rows || p.col < 0 || p.col >= layout.cols ||
            !cells.insert(p.row * layout.cols + p.col).second)
            throw Error(ErrorCode::InvalidArgument, "chart patch cells must be distinct");
        for (double c : p.reference_rgb)
            if (!(c >= 0.0 && c <= 1.0))
                throw Error(ErrorCode::InvalidArgument, "reference rgb outside [0,1]");
        if (p.group == 3) {
            ++greens;
            const double L = p.reference_lab.L, a = p.reference_lab.a, b = p.reference_lab.b;
            const bool l_ok = L == 25.0 || L == 50.0 || L == 75.0;
            const bool ab_ok = (a == -65.0 && (b == 65.0 || b == 0.0)) || (a == 0.0 && b == 65.0);
            if (!l_ok || !ab_ok)
                throw Error(ErrorCode::InvalidArgument, "group 3 patch outside the green design set");
        }
    }
    if (greens != 9) throw Error(ErrorCode::InvalidArgument, "group 3 must have exactly 9 patches");
}

std::vector<Rgb> ChartSpec::reference_values() const {
    std::vector<Rgb> out(patches.size());
    for (const auto& p : patches) out.at(p.id) = p.reference_rgb;
    return out;
}

// ---------------------------------------------------------------- geometry

Point2 Homography::apply(Point2 p) const {
    const double w = h[6] * p.x + h[7] * p.y + h[8];
    return {(h[0] * p.x + h[1] * p.y + h[2]) / w, (h[3] * p.x + h[4] * p.y + h[5]) / w};
}

Homography Homography::inverse() const {
    Eigen::Matrix3d m;
    m << h[0], h[1], h[2], h[3], h[4], h[5], h[6], h[7], h[8];
    const Eigen::Matrix3d inv = m.inverse();
    Homography out;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c) out.h[r * 3 + c] = inv(r, c) / inv(2, 2);
    return out;
}

Homography Homography::from_points(std::span<const Point2, 4> src, std::span<const Point2, 4> dst) {
    Eigen::Matrix<double, 8, 8> a;
    Eigen::Matrix<double, 8, 1> b;
    for (int i = 0; i < 4; ++i) {
        const double x = src[i].x, y = src[i].y, u = dst[i].x, v = dst[i].y;
        a.row(2 * i) << x, y, 1, 0, 0, 0, -u * x, -u * y;
        a.row(2 * i + 1) << 0, 0, 0, x, y, 1, -v * x, -v * y;
        b(2 * i) = u;
        b(2 * i + 1) = v;
    }
    const Eigen::Matrix<double, 8, 1> sol = a.fullPivLu().solve(b);
    Homography out;
    for (int i = 0; i < 8; ++i) out.h[i] = sol(i);
    out.h[8] = 1.0;
    return out;
}

bool inside_quad(const std::array<Point2, 4>& quad, Point2 p) {
    int sign = 0;
    for (int i = 0; i < 4; ++i) {
        const Point2 a = quad[i], b = quad[(i + 1) % 4];
        const double cross = (b.x - a.x) * (p.y - a.y) - (b.y - a.y) * (p.x - a.x);
        const int s = cross > 0 ? 1 : (cross < 0 ? -1 : 0);
        if (s == 0) continue;
        if (sign == 0) sign = s;
        if (s != sign) return false;
    }
    return sign != 0;
}

std::vector<Rgb> sample_patches(const Raster& img, const ChartSpec& spec, const Homography& h) {
    const Homography inv = h.inverse();
    const auto& lay = spec.layout;
    std::vector<Rgb> out(spec.patches.size(), Rgb{0, 0, 0});
    for (const auto& p : spec.patches) {
        const Point2 o = lay.cell_origin(p.row, p.col);
        const double x0 = o.x + 0.25 * lay.patch, x1 = o.x + 0.75 * lay.patch;
        const double y0 = o.y + 0.25 * lay.patch, y1 = o.y + 0.75 * lay.patch;
        double min_x = 1e18, min_y = 1e18, max_x = -1e18, max_y = -1e18;
        for (Point2 c : {Point2{x0, y0}, Point2{x1, y0}, Point2{x1, y1}, Point2{x0, y1}}) {
            const Point2 q = h.apply(c);
            min_x = std::min(min_x, q.x);
            max_x = std::max(max_x, q.x);
            min_y = std::min(min_y, q.y);
            max_y = std::max(max_y, q.y);
        }
        const int ix0 = std::max(0, static_cast<int>(std::floor(min_x)));
        const int ix1 = std::min(img.width() - 1, static_cast<int>(std::ceil(max_x)));
        const int iy0 = std::max(0, static_cast<int>(std::floor(min_y)));
        const int iy1 = std::min(img.height() - 1, static_cast<int>(std::ceil(max_y)));
        Rgb sum{0, 0, 0};
        std::size_t n = 0;
        for (int y = iy0; y <= iy1; ++y)
            for (int x = ix0; x <= ix1; ++x) {
                const Point2 m = inv.apply({static_cast<double>(x), static_cast<double>(y)});
                if (m.x < x0 || m.x > x1 || m.y < y0 || m.y > y1) continue;
                const auto px = img.rgb(x, y);
                for (int c = 0; c < 3; ++c) sum[c] += px[c];
                ++n;
            }
        if (n > 0)
            for (int c = 0; c < 3; ++c) out.at(p.id)[c] = sum[c] / (255.0 * n);
    }
    return out;
}

// ---------------------------------------------------------------- detection

namespace {

struct QuadCandidate {
    std::array<Point2, 4> corners;  // clockwise on screen, arbitrary start
};

std::optional<Point2> intersect(const LineParam& a, const LineParam& b) {
    const double ta = a.theta * std::numbers::pi / 180.0, tb = b.theta * std::numbers::pi / 180.0;
    const double ca = std::cos(ta), sa = std::sin(ta), cb = std::cos(tb), sb = std::sin(tb);
    const double det = ca * sb - sa * cb;
    if (std::abs(det) < 1e-9) return std::nullopt;
    return Point2{(a.rho * sb - b.rho * sa) / det, (ca * b.rho - cb * a.rho) / det};
}

// Signed offset between two near-parallel lines, expressed in a's frame.
double parallel_offset(const LineParam& a, const LineParam& b) {
    const double d = std::abs(a.theta - b.theta);
    return d > 90.0 ? -b.rho - a.rho : b.rho - a.rho;
}

// Pick two pairs of roughly parallel, roughly perpendicular sides.
std::optional<std::array<LineParam, 4>> choose_sides(const std::vector<LineParam>& peaks,
                                                     double min_separation) {
    const std::size_t n = std::min<std::size_t>(peaks.size(), 24);
    for (std::size_t i = 0; i < n; ++i) {
        const LineParam& a = peaks[i];
        std::optional<LineParam> a2;
        for (std::size_t j = 0; j < n && !a2; ++j)
            if (j != i && line_angle_distance(a.theta, peaks[j].theta) < 6.0 &&
                std::abs(parallel_offset(a, peaks[j])) > min_separation)
                a2 = peaks[j];
        if (!a2) continue;
        for (std::size_t j = 0; j < n; ++j) {
            const LineParam& b = peaks[j];
            const double d = line_angle_distance(a.theta, b.theta);
            if (d < 70.0) continue;
            for (std::size_t k = 0; k < n; ++k)
                if (k != j && line_angle_distance(b.theta, peaks[k].theta) < 6.0 &&
                    std::abs(parallel_offset(b, peaks[k])) > min_separation)
                    return std::array<LineParam, 4>{a, b, *a2, peaks[k]};
        }
    }
    return std::nullopt;
}

// Shift a fitted boundary line outward by `offset` pixels (away from `centre`).
LineParam push_outward(LineParam l, Point2 centre, double offset) {
    const double t = l.theta * std::numbers::pi / 180.0;
    const double side = centre.x * std::cos(t) + centre.y * std::sin(t) - l.rho;
    l.rho += side > 0 ? -offset : offset;
    return l;
}

std::optional<QuadCandidate> fit_quad(const BinaryMask& region) {
    const BinaryMask boundary = inner_boundary(region);
    const std::size_t area = region.count();
    const double short_side = std::sqrt(static_cast<double>(area) / 1.4);
    const int min_votes = std::max(10, static_cast<int>(0.3 * short_side));
    const auto peaks = hough_lines(boundary, 0.5, min_votes);
    const auto sides = choose_sides(peaks, 0.4 * short_side);
    if (!sides) return std::nullopt;

    double cx = 0, cy = 0;
    for (int y = 0; y < region.height(); ++y)
        for (int x = 0; x < region.width(); ++x)
            if (region(x, y)) {
                cx += x;
                cy += y;
            }
    const Point2 centre{cx / area, cy / area};

    std::array<LineParam, 4> fitted;
    for (int i = 0; i < 4; ++i) {
        LineParam l = refine_line(boundary, (*sides)[i], 3.0);
        l = refine_line(boundary, l, 1.5);
        fitted[i] = push_outward(l, centre, 0.5);
    }
    // Sides ordered a, b, a2, b2 -> corners at consecutive intersections.
    QuadCandidate q;
    for (int i = 0; i < 4; ++i) {
        const auto p = intersect(fitted[i], fitted[(i + 1) % 4]);
        if (!p) return std::nullopt;
        q.corners[i] = *p;
    }
    // Order clockwise on screen (y down) by angle about the centroid.
    Point2 c{0, 0};
    for (const auto& p : q.corners) {
        c.x += p.x / 4;
        c.y += p.y / 4;
    }
    std::sort(q.corners.begin(), q.corners.end(), [&](const Point2& a, const Point2& b) {
        return std::atan2(a.y - c.y, a.x - c.x) < std::atan2(b.y - c.y, b.x - c.x);
    });
    return q;
}

double quad_area(const std::array<Point2, 4>& q) {
    double s = 0;
    for (int i = 0; i < 4; ++i) s += q[i].x * q[(i + 1) % 4].y - q[(i + 1) % 4].x * q[i].y;
    return std::abs(s) / 2;
}

bool convex(const std::array<Point2, 4>& q) {
    int sign = 0;
    for (int i = 0; i < 4; ++i) {
        const Point2 a = q[i], b = q[(i + 1) % 4], c = q[(i + 2) % 4];
        const double cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x);
        const int s = cross > 0 ? 1 : -1;
        if (sign == 0) sign = s;
        if (s != sign) return false;
    }
    return sign != 0;
}

std::array<Point2, 4> model_corners(const ChartLayout& lay, double inset) {
    return {Point2{inset, inset}, Point2{lay.width() - inset, inset},
            Point2{lay.width() - inset, lay.height() - inset}, Point2{inset, lay.height() - inset}};
}

// Fraction of frame probes whose brightness matches the frame design.
double frame_agreement(const Plane& grey, double threshold, const ChartLayout& lay,
                       const Homography& h) {
    int good = 0, total = 0;
    auto probe = [&](Point2 m, bool expect_bright) {
        const Point2 p = h.apply(m);
        const int x = static_cast<int>(std::lround(p.x)), y = static_cast<int>(std::lround(p.y));
        ++total;
        if (!grey.contains(x, y)) return;
        good += (grey(x, y) > threshold) == expect_bright;
    };
    const double W = lay.width(), H = lay.height();
    const double black_mid = lay.black_frame / 2;
    const double white_mid = lay.black_frame + lay.white_frame / 2;
    const double margin_mid = -lay.margin / 2;
    for (int i = 1; i < 16; ++i) {
        const double f = i / 16.0;
        for (auto [inset, bright] : {std::pair{black_mid, false}, std::pair{white_mid, true},
                                     std::pair{margin_mid, true}}) {
            probe({inset + f * (W - 2 * inset), inset}, bright);
            probe({inset + f * (W - 2 * inset), H - inset}, bright);
            probe({inset, inset + f * (H - 2 * inset)}, bright);
            probe({W - inset, inset + f * (H - 2 * inset)}, bright);
        }
    }
    // Gaps between patches belong to the black panel.
    for (int r = 0; r <= lay.rows; ++r)
        for (int c = 0; c < lay.cols; ++c) {
            const Point2 o = lay.cell_origin(std::min(r, lay.rows - 1), c);
            const double gy = r < lay.rows ? o.y - lay.gap / 2 : o.y + lay.patch + lay.gap / 2;
            probe({o.x + lay.patch / 2, gy}, false);
        }
    return total ? static_cast<double>(good) / total : 0.0;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        sab += (a[i] - ma) * (b[i] - mb);
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

double bilinear(const Plane& p, double x, double y) {
    const int x0 = static_cast<int>(std::floor(x)), y0 = static_cast<int>(std::floor(y));
    const double fx = x - x0, fy = y - y0;
    return (1 - fy) * ((1 - fx) * p.clamped(x0, y0) + fx * p.clamped(x0 + 1, y0)) +
           fy * ((1 - fx) * p.clamped(x0, y0 + 1) + fx * p.clamped(x0 + 1, y0 + 1));
}

// Sub-pixel outer edge of the black frame: along each side, grey profiles
// across the boundary are cut at the mid level between frame and margin, and
// a line is fitted to the crossings. Sides that yield too few crossings keep
// their mask-based position.
std::array<Point2, 4> refine_quad(const Plane& grey, const std::array<Point2, 4>& q) {
    struct Side {
        Point2 p, d;
    };
    Point2 c{0, 0};
    for (const auto& p : q) c = {c.x + p.x / 4, c.y + p.y / 4};
    std::array<Side, 4> sides;
    for (int i = 0; i < 4; ++i) {
        const Point2 a = q[i], b = q[(i + 1) % 4];
        const double len = std::hypot(b.x - a.x, b.y - a.y);
        Point2 dir{(b.x - a.x) / len, (b.y - a.y) / len};
        Point2 n{dir.y, -dir.x};
        if ((a.x - c.x) * n.x + (a.y - c.y) * n.y < 0) n = {-n.x, -n.y};
        sides[i] = {a, dir};
        std::vector<Point2> pts;
        for (double t = 0.15 * len; t <= 0.85 * len; t += 1.0) {
            const Point2 o{a.x + t * dir.x, a.y + t * dir.y};
            auto at = [&](double d) { return bilinear(grey, o.x + d * n.x, o.y + d * n.y); };
            const double inner = (at(-3.0) + at(-2.5)) / 2, outer = (at(2.5) + at(3.0)) / 2;
            if (outer - inner < 0.1) continue;
            const double mid = (inner + outer) / 2;
            double prev = at(-2.0);
            for (double d = -1.75; d <= 2.0; d += 0.25) {
                const double v = at(d);
                if (prev < mid && v >= mid) {
                    const double e = d - 0.25 + 0.25 * (mid - prev) / (v - prev);
                    pts.push_back({o.x + e * n.x, o.y + e * n.y});
                    break;
                }
                prev = v;
            }
        }
        if (pts.size() < 10) continue;
        double mx = 0, my = 0;
        for (const auto& p : pts) mx += p.x, my += p.y;
        mx /= pts.size();
        my /= pts.size();
        double sxx = 0, sxy = 0, syy = 0;
        for (const auto& p : pts) {
            sxx += (p.x - mx) * (p.x - mx);
            sxy += (p.x - mx) * (p.y - my);
            syy += (p.y - my) * (p.y - my);
        }
        const double ang = 0.5 * std::atan2(2 * sxy, sxx - syy);
        sides[i] = {{mx, my}, {std::cos(ang), std::sin(ang)}};
    }
    std::array<Point2, 4> out = q;
    for (int i = 0; i < 4; ++i) {
        const Side& s = sides[(i + 3) % 4];
        const Side& t = sides[i];
        const double det = s.d.x * (-t.d.y) - s.d.y * (-t.d.x);
        if (std::abs(det) < 1e-9) continue;
        const double rx = t.p.x - s.p.x, ry = t.p.y - s.p.y;
        const double u = (rx * (-t.d.y) - ry * (-t.d.x)) / det;
        const Point2 p{s.p.x + u * s.d.x, s.p.y + u * s.d.y};
        if (std::hypot(p.x - q[i].x, p.y - q[i].y) < 3.0) out[i] = p;
    }
    return out;
}

struct Oriented {
    ChartDetection detection;
    double score = -2.0;
};

}  // namespace

ChartDetection detect_chart(const Raster& img, const ChartSpec& spec) {
    spec.validate();
    if (img.width() < 100 || img.height() < 100)
        throw Error(ErrorCode::ImageTooSmall, "detect_chart: image must be at least 100x100");
    if (img.channels() != 3)
        throw Error(ErrorCode::InvalidArgument, "detect_chart: expected an RGB image");

    const Plane grey = rgb_to_grey(img);
    double threshold;
    try {
        threshold = otsu_threshold(grey);
    } catch (const Error&) {
        throw Error(ErrorCode::ChartNotFound, "chart not found: flat image");
    }
    BinaryMask dark(grey.width(), grey.height());
    for (std::size_t i = 0; i < grey.size(); ++i) dark[i] = grey[i] <= threshold;

    // The black frame encloses everything inside it, so filling holes turns
    // the chart into one solid quadrilateral. Erosion cleans thin clutter,
    // the survivor seeds a reconstruction of the full shape, and an opening
    // strips spurs before the sides are measured.
    const BinaryMask solid = fill_holes(dark);
    const BinaryMask cleaned = erode(solid, 2);
    const LabelMap comps = connected_components(cleaned, Connectivity::Eight);
    const auto boxes = label_boxes(comps);

    const auto& lay = spec.layout;
    const double model_aspect = lay.width() / lay.height();
    const double min_area = std::max(2000.0, 0.004 * img.width() * img.height());
    std::vector<std::size_t> areas(boxes.size(), 0);
    for (auto l : comps.data())
        if (l > 0) ++areas[l];

    const auto refs = spec.reference_values();
    std::vector<double> ref_grey(refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i)
        ref_grey[i] = 0.299 * refs[i][0] + 0.587 * refs[i][1] + 0.114 * refs[i][2];

    std::vector<ChartDetection> found;
    for (std::size_t label = 1; label < boxes.size(); ++label) {
        if (static_cast<double>(areas[label]) < min_area) continue;
        const Rect& b = boxes[label];
        if (b.x == 0 || b.y == 0 || b.right() == img.width() || b.bottom() == img.height())
            continue;  // a chart may not touch the image border
        const BinaryMask seed = label_mask(comps, static_cast<std::int32_t>(label));
        const BinaryMask shape = open(reconstruct(solid, seed), 2);
        auto quad = fit_quad(shape);
        if (!quad || !convex(quad->corners)) continue;
        quad->corners = refine_quad(grey, quad->corners);
        if (!convex(quad->corners)) continue;

        const double qa = quad_area(quad->corners);
        const double fill = static_cast<double>(shape.count()) / qa;
        if (fill < 0.9 || fill > 1.1) continue;

        Oriented best;
        for (int start = 0; start < 4; ++start) {
            std::array<Point2, 4> corners;
            for (int i = 0; i < 4; ++i) corners[i] = quad->corners[(start + i) % 4];
            const double top = std::hypot(corners[1].x - corners[0].x, corners[1].y - corners[0].y);
            const double left = std::hypot(corners[3].x - corners[0].x, corners[3].y - corners[0].y);
            const double aspect = top / left;
            if (std::abs(aspect / model_aspect - 1.0) > 0.25) continue;

            const auto model = model_corners(lay, 0.0);
            const Homography h = Homography::from_points(model, corners);
            if (frame_agreement(grey, threshold, lay, h) < 0.9) continue;

            ChartDetection det;
            det.corners = corners;
            det.homography = h;
            det.patch_values = sample_patches(img, spec, h);
            const auto outer = model_corners(lay, -lay.margin);
            for (int i = 0; i < 4; ++i) det.outline[i] = h.apply(outer[i]);

            std::vector<double> seen(det.patch_values.size());
            for (std::size_t i = 0; i < seen.size(); ++i) {
                const auto& v = det.patch_values[i];
                seen[i] = 0.299 * v[0] + 0.587 * v[1] + 0.114 * v[2];
            }
            const double score = pearson(seen, ref_grey);
            if (score > best.score) best = {std::move(det), score};
        }
        if (best.score > 0.5) found.push_back(std::move(best.detection));
    }
    if (found.empty()) throw Error(ErrorCode::ChartNotFound, "chart not found");
    if (found.size() > 1) throw Error(ErrorCode::AmbiguousChart, "ambiguous chart: several candidates");
    return found.front();
}

// ---------------------------------------------------------------- weights

PatchWeights uniform_weights(std::size_t n) { return {std::vector<double>(n, 1.0)}; }

PatchWeights compute_patch_weights(const Raster& img, const ChartDetection& detection) {
    const auto& patches = detection.patch_values;
    if (patches.empty()) throw Error(ErrorCode::InvalidArgument, "detection has no patch values");
    std::vector<std::uint64_t> counts(patches.size(), 0);
    std::uint64_t total = 0;
    for (int y = 0; y < img.height(); ++y)
        for (int x = 0; x < img.width(); ++x) {
            if (inside_quad(detection.outline, {static_cast<double>(x), static_cast<double>(y)}))
                continue;
            const auto px = img.rgb(x, y);
            const Rgb v{px[0] / 255.0, px[1] / 255.0, px[2] / 255.0};
            std::size_t best = 0;
            double best_d = 1e18;
            for (std::size_t k = 0; k < patches.size(); ++k) {
                double d = 0;
                for (int c = 0; c < 3; ++c) d += (v[c] - patches[k][c]) * (v[c] - patches[k][c]);
                if (d < best_d) {
                    best_d = d;
                    best = k;
                }
            }
            ++counts[best];
            ++total;
        }
    PatchWeights w;
    w.w.resize(patches.size());
    for (std::size_t k = 0; k < patches.size(); ++k)
        w.w[k] = (total ? static_cast<double>(counts[k]) / total : 0.0) + kWeightFloor;
    return w;
}

// ---------------------------------------------------------------- transform

int term_count(TransformKind kind) { return kind == TransformKind::Linear ? 4 : 10; }

std::vector<double> colour_terms(TransformKind kind, const Rgb& c) {
    if (kind == TransformKind::Linear) return {c[0], c[1], c[2], 1.0};
    return {c[0],        c[1],        c[2],        c[0] * c[0], c[1] * c[1],
            c[2] * c[2], c[0] * c[1], c[0] * c[2], c[1] * c[2], 1.0};
}

Rgb ColourTransform::apply(const Rgb& rgb) const {
    const auto terms = colour_terms(kind, rgb);
    const std::size_t n = terms.size();
    Rgb out{0, 0, 0};
    for (int r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < n; ++c) out[r] += matrix[r * n + c] * terms[c];
    return out;
}

ColourTransform ColourTransform::identity(TransformKind kind) {
    ColourTransform t;
    t.kind = kind;
    const int n = term_count(kind);
    t.matrix.assign(3 * n, 0.0);
    for (int r = 0; r < 3; ++r) t.matrix[r * n + r] = 1.0;
    t.fitted_weights = uniform_weights();
    return t;
}

ColourTransform fit_transform(std::span<const Rgb> source, std::span<const Rgb> target,
                              const PatchWeights& weights, TransformKind kind) {
    const std::size_t n = source.size();
    if (n != target.size() || n != weights.w.size())
        throw Error(ErrorCode::DimensionMismatch, "fit_transform: sample counts differ");
    const int p = term_count(kind);
    if (n < static_cast<std::size_t>(p))
        throw Error(ErrorCode::DegeneratePatchSet, "degenerate patch set: too few samples");
    double wsum = 0;
    for (double w : weights.w) {
        if (!(w >= 0.0)) throw Error(ErrorCode::InvalidArgument, "patch weights must be >= 0");
        wsum += w;
    }
    if (!(wsum > 0.0)) throw Error(ErrorCode::InvalidArgument, "patch weights must not all be zero");

    Eigen::MatrixXd a(n, p);
    Eigen::MatrixXd b(n, 3);
    for (std::size_t k = 0; k < n; ++k) {
        const double s = std::sqrt(weights.w[k]);
        const auto terms = colour_terms(kind, source[k]);
        for (int j = 0; j < p; ++j) a(k, j) = s * terms[j];
        for (int c = 0; c < 3; ++c) b(k, c) = s * target[k][c];
    }
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) throw Error(ErrorCode::DegeneratePatchSet, "degenerate patch set: rank deficient");
    const Eigen::MatrixXd m = qr.solve(b);  // p x 3

    ColourTransform t;
    t.kind = kind;
    t.matrix.resize(3 * p);
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < p; ++c) t.matrix[r * p + c] = m(c, r);
    t.fitted_weights = weights;
    double sq = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const Rgb mapped = t.apply(source[k]);
        for (int c = 0; c < 3; ++c) sq += (mapped[c] - target[k][c]) * (mapped[c] - target[k][c]);
    }
    t.residual_rms = std::sqrt(sq / (3.0 * n));
    return t;
}

Raster apply_transform(const Raster& img, const ColourTransform& t) {
    if (img.channels() != 3) throw Error(ErrorCode::InvalidArgument, "apply_transform: expected RGB");
    Raster out(img.width(), img.height(), 3);
    // Pixel values are 8-bit, so memoise per distinct colour.
    auto src = img.data();
    auto dst = out.data();
    std::unordered_map<std::uint32_t, std::array<std::uint8_t, 3>> cache;
    for (std::size_t i = 0; i < src.size(); i += 3) {
        const std::uint32_t key = (src[i] << 16) | (src[i + 1] << 8) | src[i + 2];
        auto it = cache.find(key);
        if (it == cache.end()) {
            const Rgb mapped = t.apply({src[i] / 255.0, src[i + 1] / 255.0, src[i + 2] / 255.0});
            it = cache.emplace(key, std::array<std::uint8_t, 3>{to_byte(mapped[0]), to_byte(mapped[1]),
                                                                 to_byte(mapped[2])})
                     .first;
        }
        dst[i] = it->second[0];
        dst[i + 1] = it->second[1];
        dst[i + 2] = it->second[2];
    }
    return out;
}

CalibrationResult calibrate(const Raster& img, const ChartSpec& spec, TransformKind kind) {
    CalibrationResult r;
    r.detection = detect_chart(img, spec);
    r.weights = compute_patch_weights(img, r.detection);
    const auto refs = spec.reference_values();
    r.transform = fit_transform(r.detection.patch_values, refs, r.weights, kind);
    return r;
}

}  // namespace leafdx::calib
