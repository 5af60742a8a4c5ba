#include "leafdx/synthetic.hpp"

#include "leafdx/lesion_detection.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

namespace leafdx::synth {

namespace {

using calib::Homography;
using calib::Rgb;
constexpr double kPi = std::numbers::pi;

Rgb hsv_to_rgb(double h_deg, double s, double v) {
    const double h = std::fmod(std::fmod(h_deg, 360.0) + 360.0, 360.0) / 60.0;
    const int sector = static_cast<int>(h) % 6;
    const double f = h - std::floor(h);
    const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
    switch (sector) {
        case 0: return {v, t, p};
        case 1: return {q, v, p};
        case 2: return {p, v, t};
        case 3: return {p, q, v};
        case 4: return {t, p, v};
        default: return {v, p, q};
    }
}

Rgb clamp01(Rgb c) {
    for (auto& v : c) v = std::clamp(v, 0.0, 1.0);
    return c;
}

Rgb mix(const Rgb& a, const Rgb& b, double t) {
    return {a[0] + (b[0] - a[0]) * t, a[1] + (b[1] - a[1]) * t, a[2] + (b[2] - a[2]) * t};
}

Rgb scaled(const Rgb& c, double k) { return {c[0] * k, c[1] * k, c[2] * k}; }

std::uint8_t quantise(double v) { return to_byte(std::clamp(v, 0.0, 1.0)); }

// Smooth low-frequency field in [-1,1] built from a few random sinusoids.
struct SmoothField {
    std::array<double, 4> kx{}, ky{}, phase{};

    explicit SmoothField(std::mt19937_64& rng, double max_freq = 0.02) {
        std::uniform_real_distribution<double> freq(-max_freq, max_freq), ph(0, 2 * kPi);
        for (int i = 0; i < 4; ++i) {
            kx[i] = freq(rng);
            ky[i] = freq(rng);
            phase[i] = ph(rng);
        }
    }
    double operator()(double x, double y) const {
        double s = 0;
        for (int i = 0; i < 4; ++i) s += std::sin(kx[i] * x + ky[i] * y + phase[i]);
        return s / 4.0;
    }
};

// Mottled mid-tone background shared by charts and clutter.
struct Backdrop {
    Rgb base;
    SmoothField f0, f1, f2;

    explicit Backdrop(std::mt19937_64& rng)
        : base{0.55, 0.50, 0.42}, f0(rng), f1(rng), f2(rng) {}
    Rgb operator()(double x, double y) const {
        return {base[0] + 0.12 * f0(x, y), base[1] + 0.10 * f1(x, y), base[2] + 0.12 * f2(x, y)};
    }
};

void write_pixel(Raster& img, int x, int y, Rgb c, double sigma, std::mt19937_64& rng,
                 std::normal_distribution<double>& noise) {
    for (int ch = 0; ch < 3; ++ch) img.at(x, y, ch) = quantise(c[ch] + (sigma > 0 ? sigma * noise(rng) : 0));
}

}  // namespace

// ---------------------------------------------------------------- charts

namespace {

Homography chart_homography(const calib::ChartLayout& lay, const ChartScene& s) {
    const double k = s.pixels_per_unit * s.scale;
    const double t = s.rotation_deg * kPi / 180.0;
    const double c = std::cos(t) * k, sn = std::sin(t) * k;
    const double w2 = lay.width() / 2.0, h2 = lay.height() / 2.0;
    Homography h;
    h.h = {c, -sn, s.centre.x - c * w2 + sn * h2, sn, c, s.centre.y - sn * w2 - c * h2, 0, 0, 1};
    return h;
}

}  // namespace

RenderedChart render_chart(const calib::ChartSpec& spec, const ChartScene& scene) {
    spec.validate();
    const auto& lay = spec.layout;
    const Homography to_image = chart_homography(lay, scene);
    const Homography to_model = to_image.inverse();
    const auto distort = [&](const Rgb& c) {
        return scene.distortion ? clamp01(scene.distortion->apply(c)) : c;
    };

    constexpr Rgb kWhite{0.92, 0.92, 0.92}, kBlack{0.06, 0.06, 0.06};
    std::vector<Rgb> patch_colour;
    for (const auto& p : spec.patches) patch_colour.push_back(distort(p.reference_rgb));
    const Rgb white = distort(kWhite), black = distort(kBlack);

    std::mt19937_64 rng(scene.seed);
    const Backdrop backdrop(rng);
    std::normal_distribution<double> noise(0.0, 1.0);

    const double inner0 = lay.black_frame, inner1 = lay.black_frame + lay.white_frame;
    const auto model_colour = [&](Point2 m, bool& on_chart) -> Rgb {
        const double u = m.x, v = m.y, W = lay.width(), H = lay.height();
        on_chart = u >= -lay.margin && v >= -lay.margin && u < W + lay.margin && v < H + lay.margin;
        if (!on_chart) return {};
        if (u < 0 || v < 0 || u >= W || v >= H) return white;
        const double e = std::min({u, v, W - u, H - v});
        if (e < inner0) return black;
        if (e < inner1) return white;
        for (const auto& p : spec.patches) {
            const Point2 o = lay.cell_origin(p.row, p.col);
            if (u >= o.x && u < o.x + lay.patch && v >= o.y && v < o.y + lay.patch)
                return patch_colour[p.id];
        }
        return black;
    };

    RenderedChart out;
    out.image = Raster(scene.width, scene.height, 3);
    for (int y = 0; y < scene.height; ++y)
        for (int x = 0; x < scene.width; ++x) {
            Rgb acc{};
            for (int sy = -1; sy <= 1; ++sy)
                for (int sx = -1; sx <= 1; ++sx) {
                    const double px = x + sx / 3.0, py = y + sy / 3.0;
                    bool on_chart = false;
                    const Rgb c = model_colour(to_model.apply({px, py}), on_chart);
                    const Rgb v = on_chart ? c : distort(backdrop(px, py));
                    for (int ch = 0; ch < 3; ++ch) acc[ch] += v[ch] / 9.0;
                }
            write_pixel(out.image, x, y, acc, scene.noise_sigma, rng, noise);
        }

    const std::array<Point2, 4> model{Point2{0, 0}, Point2{lay.width(), 0},
                                      Point2{lay.width(), lay.height()}, Point2{0, lay.height()}};
    for (int i = 0; i < 4; ++i) out.corners[i] = to_image.apply(model[i]);
    out.patch_truth = patch_colour;
    return out;
}

ChartScene random_chart_scene(std::uint64_t seed, int width, int height) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> rot(-15.0, 15.0), sc(0.5, 2.0), unit(0.0, 1.0);
    ChartScene s;
    s.width = width;
    s.height = height;
    s.seed = seed * 7919 + 17;
    s.rotation_deg = rot(rng);
    s.scale = sc(rng);
    const calib::ChartLayout lay;
    const double k = s.pixels_per_unit * s.scale;
    const double t = std::abs(s.rotation_deg) * kPi / 180.0;
    const double fw = (lay.width() + 2 * lay.margin) * k, fh = (lay.height() + 2 * lay.margin) * k;
    const double ex = 0.5 * (fw * std::cos(t) + fh * std::sin(t)) + 6;
    const double ey = 0.5 * (fw * std::sin(t) + fh * std::cos(t)) + 6;
    const double span_x = std::max(0.0, width - 2 * ex), span_y = std::max(0.0, height - 2 * ey);
    s.centre = {ex + span_x * unit(rng), ey + span_y * unit(rng)};
    return s;
}

Raster render_clutter(int width, int height, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    const Backdrop backdrop(rng);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);

    struct Shape {
        bool ellipse;
        Point2 c;
        double a, b, angle;
        Rgb colour;
    };
    std::vector<Shape> shapes;
    const int n = 6 + static_cast<int>(unit(rng) * 6);
    for (int i = 0; i < n; ++i) {
        Shape s;
        s.ellipse = unit(rng) < 0.5;
        s.c = {unit(rng) * width, unit(rng) * height};
        s.a = 20 + unit(rng) * 90;
        s.b = 15 + unit(rng) * 60;
        s.angle = unit(rng) * kPi;
        s.colour = unit(rng) < 0.4 ? Rgb{0.05 + 0.1 * unit(rng), 0.05 + 0.1 * unit(rng), 0.05 + 0.1 * unit(rng)}
                                   : Rgb{unit(rng), unit(rng), unit(rng)};
        shapes.push_back(s);
    }

    Raster img(width, height, 3);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            Rgb c = backdrop(x, y);
            for (const auto& s : shapes) {
                const double dx = x - s.c.x, dy = y - s.c.y;
                const double u = dx * std::cos(s.angle) + dy * std::sin(s.angle);
                const double v = -dx * std::sin(s.angle) + dy * std::cos(s.angle);
                const bool in = s.ellipse ? (u * u) / (s.a * s.a) + (v * v) / (s.b * s.b) <= 1.0
                                          : std::abs(u) <= s.a && std::abs(v) <= s.b;
                if (in) c = s.colour;
            }
            write_pixel(img, x, y, c, 2.0 / 255.0, rng, noise);
        }
    return img;
}

// ---------------------------------------------------------------- leaves

std::string archetype_id(Archetype a) {
    switch (a) {
        case Archetype::Anthracnose: return "anthracnose";
        case Archetype::GallFlies: return "gall_flies";
        case Archetype::GreyLeafSpot: return "grey_leaf_spot";
        case Archetype::RedRust: return "red_rust";
        case Archetype::PowderyMildew: return "powdery_mildew";
        case Archetype::SootyMould: return "sooty_mould";
    }
    return "unknown";
}

namespace {

struct Lesion {
    Point2 c;
    double r = 0;
    std::array<double, 2> wobble{};  // irregular outline amplitudes
    std::array<double, 2> phase{};
    Rgb core{};
    Rgb rim{};
    double rim_width = 0;

    double radius_at(double phi) const {
        return r * (1.0 + wobble[0] * std::sin(3 * phi + phase[0]) + wobble[1] * std::sin(5 * phi + phase[1]));
    }
    double max_radius() const { return r * (1.0 + wobble[0] + wobble[1]); }
};

struct LesionPlan {
    int count_lo, count_hi;
    double r_lo, r_hi;
    double wobble;
};

LesionPlan plan_for(Archetype a) {
    switch (a) {
        case Archetype::Anthracnose: return {2, 4, 6.0, 9.0, 0.08};
        case Archetype::GallFlies: return {5, 9, 3.0, 4.5, 0.0};
        case Archetype::GreyLeafSpot: return {2, 3, 7.0, 11.0, 0.06};
        case Archetype::RedRust: return {3, 6, 4.0, 7.0, 0.15};
        case Archetype::PowderyMildew: return {1, 2, 22.0, 30.0, 0.15};
        case Archetype::SootyMould: return {1, 2, 22.0, 30.0, 0.12};
    }
    return {1, 1, 5, 5, 0};
}

void colour_lesion(Lesion& l, Archetype a, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> j(-1.0, 1.0);
    const double k = 1.0 + 0.08 * j(rng);
    switch (a) {
        case Archetype::Anthracnose:
            l.core = scaled(Rgb{0.26, 0.16, 0.08}, k);
            l.rim = scaled(Rgb{0.86, 0.78, 0.26}, 1.0 + 0.04 * j(rng));
            l.rim_width = 2.5;
            break;
        case Archetype::GallFlies:
            l.core = scaled(Rgb{0.62, 0.16, 0.28}, k);
            l.rim = scaled(Rgb{0.45, 0.10, 0.20}, k);
            l.rim_width = 1.0;
            break;
        case Archetype::GreyLeafSpot:
            l.core = scaled(Rgb{0.58, 0.54, 0.49}, k);
            l.rim = scaled(Rgb{0.30, 0.20, 0.12}, k);
            l.rim_width = 2.0;
            break;
        case Archetype::RedRust:
            l.core = scaled(Rgb{0.86, 0.46, 0.14}, k);
            l.rim = l.core;
            break;
        case Archetype::PowderyMildew:
            l.core = {0.94, 0.95, 0.93};
            l.rim = {0.80, 0.83, 0.79};
            break;
        case Archetype::SootyMould:
            l.core = {0.07, 0.07, 0.06};
            l.rim = {0.16, 0.14, 0.12};
            break;
    }
}

// Pixel colour of lesion `l` at distance d (angle phi) from its centre;
// returns false outside the lesion.
bool lesion_colour(const Lesion& l, Archetype a, double d, double phi, std::mt19937_64& rng,
                   Rgb& out) {
    const double edge = l.radius_at(phi);
    if (d > edge) return false;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (a) {
        case Archetype::Anthracnose:
        case Archetype::GreyLeafSpot:
        case Archetype::GallFlies:
            out = d > edge - l.rim_width ? l.rim : l.core;
            if (a == Archetype::GallFlies && d < 0.35 * edge) out = mix(l.core, Rgb{0.85, 0.45, 0.55}, 0.5);
            break;
        case Archetype::RedRust:
            out = scaled(l.core, 0.78 + 0.3 * u(rng));
            break;
        case Archetype::PowderyMildew:
            out = u(rng) < 0.7 ? l.core : l.rim;
            break;
        case Archetype::SootyMould:
            out = u(rng) < 0.6 ? l.core : scaled(l.rim, 0.6 + 0.6 * u(rng));
            break;
    }
    out = clamp01(out);
    return true;
}

}  // namespace

LeafScene render_leaf(std::optional<Archetype> archetype, std::uint64_t seed,
                      const LeafSceneOptions& opts) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> noise(0.0, 1.0);
    const int W = opts.width, H = opts.height;

    LeafScene scene;
    scene.orientation = unit(rng) * 180.0;
    double a = 0.33 * W + unit(rng) * 0.05 * W;
    double b = a * (0.40 + unit(rng) * 0.08);
    const double t = scene.orientation * kPi / 180.0;
    const double ct = std::cos(t), st = std::sin(t);
    {
        const double ex = std::sqrt(a * a * ct * ct + b * b * st * st);
        const double ey = std::sqrt(a * a * st * st + b * b * ct * ct);
        const double fit = std::min({1.0, (W / 2.0 - 14) / ex, (H / 2.0 - 14) / ey});
        a *= fit;
        b *= fit;
    }
    scene.semi_major = a;
    scene.semi_minor = b;
    const double ex = std::sqrt(a * a * ct * ct + b * b * st * st);
    const double ey = std::sqrt(a * a * st * st + b * b * ct * ct);
    scene.centre = {W / 2.0 + (unit(rng) - 0.5) * std::max(0.0, W - 2 * ex - 28),
                    H / 2.0 + (unit(rng) - 0.5) * std::max(0.0, H - 2 * ey - 28)};
    const Point2 c = scene.centre;

    const Rgb leaf_base = hsv_to_rgb(85 + 30 * unit(rng), 0.55 + 0.2 * unit(rng), 0.42 + 0.16 * unit(rng));
    const Rgb midrib = hsv_to_rgb(50 + 4 * unit(rng), 0.55, 0.72);
    const Rgb ground{0.70, 0.67, 0.61};
    const SmoothField leaf_var(rng, 0.03), ground_var(rng, 0.02);

    // Lesion layout in leaf coordinates (u along the axis, v across).
    std::vector<Lesion> lesions;
    if (archetype) {
        const LesionPlan plan = plan_for(*archetype);
        const int count = plan.count_lo + static_cast<int>(unit(rng) * (plan.count_hi - plan.count_lo + 1));
        const bool large = *archetype == Archetype::PowderyMildew || *archetype == Archetype::SootyMould;
        for (int i = 0, attempts = 0; i < count && attempts < 400; ++attempts) {
            Lesion l;
            l.r = plan.r_lo + unit(rng) * (plan.r_hi - plan.r_lo);
            if (large && attempts > 100) l.r *= 0.8;
            l.wobble = {plan.wobble * unit(rng), 0.5 * plan.wobble * unit(rng)};
            l.phase = {unit(rng) * 2 * kPi, unit(rng) * 2 * kPi};
            const double R = l.max_radius();
            const double u = (unit(rng) * 2 - 1) * a, v = (unit(rng) * 2 - 1) * b;
            const double du = (std::abs(u) + R + 12) / a, dv = (std::abs(v) + R + 12) / b;
            if (du * du + dv * dv > 1.0) continue;
            if (!large && std::abs(v) < R + 5) continue;  // keep clear of the midrib band
            const Point2 p{c.x + u * ct - v * st, c.y + u * st + v * ct};
            bool clash = false;
            for (const auto& o : lesions)
                clash |= std::hypot(o.c.x - p.x, o.c.y - p.y) < R + o.max_radius() + 6;
            if (clash) continue;
            l.c = p;
            colour_lesion(l, *archetype, rng);
            lesions.push_back(l);
            ++i;
        }
    }

    scene.image = Raster(W, H, 3);
    scene.leaf = BinaryMask(W, H);
    scene.lesions = BinaryMask(W, H);
    std::vector<Rect> boxes(lesions.size(), Rect{W, H, 0, 0});
    std::vector<std::array<int, 4>> extent(lesions.size(), {W, H, -1, -1});
    for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
            const double dx = x - c.x, dy = y - c.y;
            const double u = dx * ct + dy * st, v = -dx * st + dy * ct;
            Rgb col;
            if ((u * u) / (a * a) + (v * v) / (b * b) <= 1.0) {
                scene.leaf(x, y) = 1;
                const double k = 1.0 + 0.08 * leaf_var(x, y);
                col = scaled(leaf_base, k);
                if (opts.draw_midrib && std::abs(v) <= 1.5 && std::abs(u) <= a - 6) col = midrib;
                for (std::size_t i = 0; i < lesions.size(); ++i) {
                    const auto& l = lesions[i];
                    const double ldx = x - l.c.x, ldy = y - l.c.y;
                    Rgb lc{};
                    if (lesion_colour(l, *archetype, std::hypot(ldx, ldy), std::atan2(ldy, ldx), rng, lc)) {
                        col = lc;
                        scene.lesions(x, y) = 1;
                        auto& e = extent[i];
                        e = {std::min(e[0], x), std::min(e[1], y), std::max(e[2], x), std::max(e[3], y)};
                    }
                }
            } else {
                const double grain = (unit(rng) - 0.5) * 0.18;
                const double k = 1.0 + 0.08 * ground_var(x, y);
                col = {ground[0] * k + grain, ground[1] * k + grain, ground[2] * k + grain};
            }
            write_pixel(scene.image, x, y, col, opts.noise_sigma, rng, noise);
        }
    for (std::size_t i = 0; i < lesions.size(); ++i) {
        const auto& e = extent[i];
        if (e[2] >= 0) scene.lesion_boxes.push_back({e[0], e[1], e[2] - e[0] + 1, e[3] - e[1] + 1});
    }

    leaf::Stroke s;
    s.radius = opts.stroke_radius;
    s.label = leaf::StrokeLabel::Leaf;
    for (double f : {-0.5, 0.0, 0.5}) s.points.push_back({c.x + f * a * ct, c.y + f * a * st});
    scene.strokes.strokes.push_back(s);
    return scene;
}

std::vector<PatchSample> harvest_patches(int per_class, std::uint64_t seed_base) {
    if (per_class < 1) throw Error(ErrorCode::InvalidArgument, "per_class must be positive");
    std::vector<PatchSample> out;
    for (int c = 0; c < kArchetypeCount; ++c) {
        int got = 0;
        for (std::uint64_t i = 0; got < per_class; ++i) {
            if (i > 100u * static_cast<std::uint64_t>(per_class))
                throw Error(ErrorCode::TooFewSamples, "detector keeps missing " + archetype_id(Archetype(c)));
            const LeafScene sc = render_leaf(Archetype(c), seed_base + 1000u * c + i);
            const auto seg = leaf::segment_leaf(sc.image, sc.strokes);
            const auto lm = lesion::build_affected_mask(sc.image, seg);
            for (const auto& p : lesion::tile_patches(lm)) {
                if (got == per_class) break;
                out.push_back({sc.image.crop(p.bbox.x, p.bbox.y, p.bbox.w, p.bbox.h), c});
                ++got;
            }
        }
    }
    return out;
}

}  // namespace leafdx::synth
